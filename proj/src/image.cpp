#include "gridcert/image.hpp"

#include "gridcert/error.hpp"
#include "gridcert/numfmt.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace gridcert {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t MAX_PIXELS = std::size_t( 1 ) << 26;

std::string readFile( const std::string &path )
{
    std::ifstream in( path, std::ios::binary );
    if ( !in )
        throw Error( ErrorCode::Io, "cannot open " + path );
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void writeFile( const std::string &path, const std::string &data )
{
    std::ofstream out( path, std::ios::binary );
    if ( !out )
        throw Error( ErrorCode::Io, "cannot write " + path );
    out << data;
}

class PgmHeaderReader
{
public:
    explicit PgmHeaderReader( const std::string &bytes )
        : _bytes( bytes )
    {
    }

    std::size_t number()
    {
        skipSpaceAndComments();
        std::size_t start = _pos;
        std::size_t value = 0;
        while ( _pos < _bytes.size() && std::isdigit( static_cast<unsigned char>( _bytes[_pos] ) ) )
        {
            value = value * 10 + std::size_t( _bytes[_pos] - '0' );
            if ( value > MAX_PIXELS )
                throw Error( ErrorCode::Format, "PGM header: size overflow" );
            ++_pos;
        }
        if ( _pos == start )
            throw Error( ErrorCode::Format, "PGM header: expected a number" );
        return value;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t rasterStart()
    {
        if ( _pos >= _bytes.size() || !std::isspace( static_cast<unsigned char>( _bytes[_pos] ) ) )
            throw Error( ErrorCode::Format, "PGM header: missing separator before raster" );
        return _pos + 1;
    }

    void skip( std::size_t n ) { _pos += n; }

private:
    void skipSpaceAndComments()
    {
        while ( _pos < _bytes.size() )
        {
            char c = _bytes[_pos];
            if ( c == '#' )
            {
                while ( _pos < _bytes.size() && _bytes[_pos] != '\n' )
                    ++_pos;
            }
            else if ( std::isspace( static_cast<unsigned char>( c ) ) )
                ++_pos;
            else
                break;
        }
    }

    const std::string &_bytes;
    std::size_t _pos = 0;
};

Image parsePgm( const std::string &bytes )
{
    PgmHeaderReader reader( bytes );
    reader.skip( 2 );
    std::size_t width = reader.number();
    std::size_t height = reader.number();
    std::size_t maxval = reader.number();
    if ( width == 0 || height == 0 )
        throw Error( ErrorCode::Format, "PGM header: zero dimension" );
    if ( width * height > MAX_PIXELS )
        throw Error( ErrorCode::Format, "PGM header: size overflow" );
    if ( maxval != 255 )
        throw Error( ErrorCode::Format, "PGM maxval must be 255, got " + std::to_string( maxval ) );
    std::size_t start = reader.rasterStart();
    if ( bytes.size() - start < width * height )
        throw Error( ErrorCode::Format, "PGM raster is truncated" );

    std::vector<double> pixels( width * height );
    for ( std::size_t i = 0; i < pixels.size(); ++i )
        pixels[i] = static_cast<unsigned char>( bytes[start + i] ) / 255.0;
    return Image( width, height, std::move( pixels ) );
}

Image parseCsv( const std::string &text )
{
    std::vector<double> pixels;
    std::size_t width = 0;
    std::size_t height = 0;
    std::istringstream in( text );
    std::string line;
    while ( std::getline( in, line ) )
    {
        if ( !line.empty() && line.back() == '\r' )
            line.pop_back();
        if ( line.empty() )
            continue;
        std::size_t cols = 0;
        std::istringstream cells( line );
        std::string cell;
        while ( std::getline( cells, cell, ',' ) )
        {
            auto v = parseDouble( cell );
            if ( !v )
                throw Error( ErrorCode::Format,
                             "CSV row " + std::to_string( height + 1 ) + ": bad number '" + cell + "'" );
            if ( *v < 0.0 || *v > 1.0 )
                throw Error( ErrorCode::Range,
                             "CSV row " + std::to_string( height + 1 ) + ": value " + cell +
                                 " outside [0, 1]" );
            pixels.push_back( *v );
            ++cols;
            if ( pixels.size() > MAX_PIXELS )
                throw Error( ErrorCode::Format, "CSV image: size overflow" );
        }
        if ( height == 0 )
            width = cols;
        else if ( cols != width )
            throw Error( ErrorCode::Format, "CSV row " + std::to_string( height + 1 ) + ": ragged row" );
        ++height;
    }
    if ( height == 0 || width == 0 )
        throw Error( ErrorCode::Format, "CSV image is empty" );
    return Image( width, height, std::move( pixels ) );
}

} // namespace

Image::Image( std::size_t width, std::size_t height, std::vector<double> pixels )
    : _width( width )
    , _height( height )
    , _pixels( std::move( pixels ) )
{
    if ( width == 0 || height == 0 )
        throw Error( ErrorCode::Dimension, "image dimensions must be positive" );
    if ( _pixels.size() != width * height )
        throw Error( ErrorCode::Dimension, "pixel count does not match width*height" );
    for ( double p : _pixels )
        if ( !( p >= 0.0 && p <= 1.0 ) )
            throw Error( ErrorCode::Range, "pixel value outside [0, 1]" );
}

Image loadImage( const std::string &bytes )
{
    if ( bytes.size() >= 2 && bytes[0] == 'P' )
    {
        if ( bytes[1] != '5' )
            throw Error( ErrorCode::Format, "only binary grayscale PGM (P5) is supported" );
        return parsePgm( bytes );
    }
    return parseCsv( bytes );
}

Image loadImageFile( const std::string &path )
{
    return loadImage( readFile( path ) );
}

std::string encodePgm( const Image &img )
{
    std::string out = "P5\n" + std::to_string( img.width() ) + " " + std::to_string( img.height() ) + "\n255\n";
    for ( double p : img.pixels() )
        out.push_back( static_cast<char>( static_cast<unsigned char>( std::lround( p * 255.0 ) ) ) );
    return out;
}

std::string encodeCsv( const Image &img )
{
    std::string out;
    for ( std::size_t y = 0; y < img.height(); ++y )
    {
        for ( std::size_t x = 0; x < img.width(); ++x )
        {
            if ( x > 0 )
                out += ',';
            out += formatDouble( img.at( x, y ) );
        }
        out += '\n';
    }
    return out;
}

void saveImageFile( const Image &img, const std::string &path )
{
    bool pgm = fs::path( path ).extension() == ".pgm";
    writeFile( path, pgm ? encodePgm( img ) : encodeCsv( img ) );
}

Image downscale( const Image &img, std::size_t factor )
{
    if ( factor == 0 )
        throw Error( ErrorCode::Precondition, "downscale factor must be positive" );
    if ( img.width() % factor != 0 || img.height() % factor != 0 )
        throw Error( ErrorCode::Dimension,
                     "image " + std::to_string( img.width() ) + "x" + std::to_string( img.height() ) +
                         " not divisible by factor " + std::to_string( factor ) );
    if ( factor == 1 )
        return img;

    std::size_t w = img.width() / factor;
    std::size_t h = img.height() / factor;
    double area = double( factor * factor );
    std::vector<double> out( w * h );
    for ( std::size_t by = 0; by < h; ++by )
        for ( std::size_t bx = 0; bx < w; ++bx )
        {
            double sum = 0.0;
            for ( std::size_t dy = 0; dy < factor; ++dy )
                for ( std::size_t dx = 0; dx < factor; ++dx )
                    sum += img.at( bx * factor + dx, by * factor + dy );
            out[by * w + bx] = std::clamp( sum / area, 0.0, 1.0 );
        }
    return Image( w, h, std::move( out ) );
}

namespace {

// Shape masks per class family; the family index rotates through four patterns
// and larger class counts shift the pattern to keep classes distinct.
bool inBlob( std::size_t cls, std::size_t side, long x, long y, long dx, long dy )
{
    long s = long( side );
    long shift = long( cls / 4 );
    long cx = x - dx;
    long cy = y - dy;
    switch ( cls % 4 )
    {
    case 0: // centred square
        return cx >= s / 4 + shift && cx < 3 * s / 4 - shift && cy >= s / 4 && cy < 3 * s / 4;
    case 1: // horizontal bar
        return cy >= s / 2 - 1 + shift && cy <= s / 2 + shift && cx >= 1 && cx < s - 1;
    case 2: // vertical bar
        return cx >= s / 2 - 1 + shift && cx <= s / 2 + shift && cy >= 1 && cy < s - 1;
    default: // diagonal stroke
        return cx - cy == shift && cx >= 1 && cx < s - 1;
    }
}

} // namespace

std::vector<LabeledImage> synthDataset( std::uint64_t seed,
                                        std::size_t count,
                                        std::size_t side,
                                        std::size_t numClasses )
{
    if ( count < 1 || side < 4 || numClasses < 2 )
        throw Error( ErrorCode::Precondition, "synth_dataset needs count >= 1, side >= 4, num_classes >= 2" );

    std::mt19937_64 rng( seed );
    std::uniform_real_distribution<double> jitter( -0.08, 0.08 );
    std::uniform_int_distribution<int> offset( -1, 1 );

    std::vector<LabeledImage> data;
    data.reserve( count );
    for ( std::size_t i = 0; i < count; ++i )
    {
        std::size_t cls = i % numClasses;
        double base = 0.15 + 0.1 * double( cls % 4 );
        long dx = offset( rng );
        long dy = offset( rng );
        std::vector<double> pixels( side * side );
        for ( std::size_t y = 0; y < side; ++y )
            for ( std::size_t x = 0; x < side; ++x )
            {
                double v = base + jitter( rng );
                if ( inBlob( cls, side, long( x ), long( y ), dx, dy ) )
                    v += 0.5;
                pixels[y * side + x] = std::clamp( v, 0.0, 1.0 );
            }
        data.push_back( { Image( side, side, std::move( pixels ) ), cls } );
    }
    return data;
}

std::vector<ManifestEntry> loadManifest( const std::string &manifestPath )
{
    nlohmann::json doc;
    try
    {
        doc = nlohmann::json::parse( readFile( manifestPath ) );
    }
    catch ( const nlohmann::json::parse_error &e )
    {
        throw Error( ErrorCode::Format, "manifest " + manifestPath + ": " + e.what() );
    }
    if ( !doc.is_object() || !doc.contains( "images" ) || !doc["images"].is_array() )
        throw Error( ErrorCode::Format, "manifest needs an 'images' array" );

    std::vector<ManifestEntry> entries;
    for ( const auto &item : doc["images"] )
    {
        if ( !item.is_object() || !item.contains( "path" ) || !item["path"].is_string() ||
             !item.contains( "label" ) || !item["label"].is_number_unsigned() )
            throw Error( ErrorCode::Format, "manifest entry needs string 'path' and integer 'label'" );
        entries.push_back( { item["path"].get<std::string>(), item["label"].get<std::size_t>() } );
    }
    return entries;
}

void saveManifest( const std::vector<ManifestEntry> &entries, const std::string &manifestPath )
{
    nlohmann::ordered_json doc;
    doc["images"] = nlohmann::ordered_json::array();
    for ( const ManifestEntry &e : entries )
        doc["images"].push_back( { { "path", e.path }, { "label", e.label } } );
    writeFile( manifestPath, doc.dump( 1 ) + "\n" );
}

std::vector<LabeledImage> loadDataset( const std::string &manifestPath )
{
    fs::path base = fs::path( manifestPath ).parent_path();
    std::vector<LabeledImage> data;
    for ( const ManifestEntry &e : loadManifest( manifestPath ) )
    {
        fs::path p( e.path );
        if ( p.is_relative() )
            p = base / p;
        data.push_back( { loadImageFile( p.string() ), e.label } );
    }
    return data;
}

void writeDataset( const std::vector<LabeledImage> &data, const std::string &directory )
{
    fs::create_directories( directory );
    std::vector<ManifestEntry> entries;
    for ( std::size_t i = 0; i < data.size(); ++i )
    {
        std::string name = "img" + std::to_string( i ) + ".csv";
        writeFile( ( fs::path( directory ) / name ).string(), encodeCsv( data[i].image ) );
        entries.push_back( { name, data[i].label } );
    }
    saveManifest( entries, ( fs::path( directory ) / "manifest.json" ).string() );
}

} // namespace gridcert
