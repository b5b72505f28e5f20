#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gridcert {

using Vector = std::vector<double>;

/// Dense row-major matrix. rows = output dimension, cols = input dimension.
class Matrix
{
public:
    Matrix() = default;
    Matrix( std::size_t rows, std::size_t cols, double fill = 0.0 )
        : _rows( rows )
        , _cols( cols )
        , _data( rows * cols, fill )
    {
    }

    static Matrix identity( std::size_t n );

    std::size_t rows() const { return _rows; }
    std::size_t cols() const { return _cols; }

    double &operator()( std::size_t r, std::size_t c ) { return _data[r * _cols + c]; }
    double operator()( std::size_t r, std::size_t c ) const { return _data[r * _cols + c]; }

    std::span<const double> row( std::size_t r ) const
    {
        return { _data.data() + r * _cols, _cols };
    }

    bool operator==( const Matrix & ) const = default;

private:
    std::size_t _rows = 0;
    std::size_t _cols = 0;
    std::vector<double> _data;
};

enum class Activation { ReLU, Identity };

struct Layer
{
    Matrix weights;
    Vector biases;
    Activation activation = Activation::ReLU;

    std::size_t inputDim() const { return weights.cols(); }
    std::size_t outputDim() const { return weights.rows(); }

    bool operator==( const Layer & ) const = default;
};

/*
  A feedforward network. Hidden layers are ReLU, except for Identity layers
  produced by prependLayer (they stay affine). The last layer is always
  Identity. Immutable once constructed.
*/
class Network
{
public:
    Network( std::size_t inputDim,
             std::vector<Layer> layers,
             std::optional<std::vector<std::string>> classLabels = std::nullopt );

    std::size_t inputDim() const { return _inputDim; }
    std::size_t outputDim() const { return _layers.back().outputDim(); }
    const std::vector<Layer> &layers() const { return _layers; }
    const std::optional<std::vector<std::string>> &classLabels() const { return _classLabels; }

    std::size_t reluCount() const;

    bool operator==( const Network & ) const = default;

private:
    std::size_t _inputDim;
    std::vector<Layer> _layers;
    std::optional<std::vector<std::string>> _classLabels;
};

Network loadNetwork( const std::string &document );
std::string saveNetwork( const Network &net );
Network loadNetworkFile( const std::string &path );
void saveNetworkFile( const Network &net, const std::string &path );

/// One affine layer followed by its activation.
Vector applyLayer( const Layer &layer, std::span<const double> input );

Vector evaluate( const Network &net, std::span<const double> input );

/// Argmax of the output; ties go to the lowest index.
std::size_t argmax( std::span<const double> scores );
std::size_t classify( const Network &net, std::span<const double> input );

/// Returns a network computing net( weights * z + biases ).
Network prependLayer( const Network &net, Matrix weights, Vector biases );

} // namespace gridcert
