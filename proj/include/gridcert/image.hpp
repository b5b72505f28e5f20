#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace gridcert {

/// Grayscale image, row-major, pixels in [0, 1].
class Image
{
public:
    Image( std::size_t width, std::size_t height, std::vector<double> pixels );

    std::size_t width() const { return _width; }
    std::size_t height() const { return _height; }
    const std::vector<double> &pixels() const { return _pixels; }
    double at( std::size_t x, std::size_t y ) const { return _pixels[y * _width + x]; }

    bool operator==( const Image & ) const = default;

private:
    std::size_t _width;
    std::size_t _height;
    std::vector<double> _pixels;
};

struct LabeledImage
{
    Image image;
    std::size_t label;
};

/// Accepts binary PGM (P5, maxval 255) or CSV of reals, detected by content.
Image loadImage( const std::string &bytes );
Image loadImageFile( const std::string &path );

std::string encodePgm( const Image &img );
std::string encodeCsv( const Image &img );
void saveImageFile( const Image &img, const std::string &path );

/// Block-mean pooling by an integer factor.
Image downscale( const Image &img, std::size_t factor );

/// Deterministic class-patterned images; labels assigned round-robin.
std::vector<LabeledImage> synthDataset( std::uint64_t seed,
                                        std::size_t count,
                                        std::size_t side,
                                        std::size_t numClasses );

struct ManifestEntry
{
    std::string path;
    std::size_t label;
};

/// Manifest JSON: {"images": [{"path": "...", "label": 0}, ...]}; paths relative to the manifest.
std::vector<ManifestEntry> loadManifest( const std::string &manifestPath );
void saveManifest( const std::vector<ManifestEntry> &entries, const std::string &manifestPath );
std::vector<LabeledImage> loadDataset( const std::string &manifestPath );

/// Writes images as CSV files next to a manifest.
void writeDataset( const std::vector<LabeledImage> &data, const std::string &directory );

} // namespace gridcert
