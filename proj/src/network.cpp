#include "gridcert/network.hpp"

#include "gridcert/error.hpp"
#include "gridcert/numfmt.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace gridcert {

using Json = nlohmann::ordered_json;

Matrix Matrix::identity( std::size_t n )
{
    Matrix m( n, n );
    for ( std::size_t i = 0; i < n; ++i )
        m( i, i ) = 1.0;
    return m;
}

namespace {

std::string layerTag( std::size_t index )
{
    return "layer " + std::to_string( index + 1 );
}

void validateLayers( std::size_t inputDim, const std::vector<Layer> &layers )
{
    if ( inputDim == 0 )
        throw Error( ErrorCode::Dimension, "input_dim must be positive" );
    if ( layers.empty() )
        throw Error( ErrorCode::Format, "network has no layers" );

    std::size_t expected = inputDim;
    for ( std::size_t i = 0; i < layers.size(); ++i )
    {
        const Layer &layer = layers[i];
        if ( layer.weights.rows() == 0 )
            throw Error( ErrorCode::Dimension, layerTag( i ) + ": empty weight matrix" );
        if ( layer.weights.cols() != expected )
            throw Error( ErrorCode::Dimension,
                         layerTag( i ) + ": weight matrix has " +
                             std::to_string( layer.weights.cols() ) + " columns, previous layer has " +
                             std::to_string( expected ) + " outputs" );
        if ( layer.biases.size() != layer.weights.rows() )
            throw Error( ErrorCode::Dimension,
                         layerTag( i ) + ": bias length " + std::to_string( layer.biases.size() ) +
                             " does not match " + std::to_string( layer.weights.rows() ) + " rows" );
        expected = layer.weights.rows();
    }
    if ( layers.back().activation != Activation::Identity )
        throw Error( ErrorCode::Format, layerTag( layers.size() - 1 ) + ": output layer must be affine" );
}

double parseNumber( const Json &value, std::size_t layerIndex )
{
    if ( value.is_string() )
    {
        auto parsed = parseDouble( value.get<std::string>() );
        if ( !parsed )
            throw Error( ErrorCode::Format,
                         layerTag( layerIndex ) + ": bad number '" + value.get<std::string>() + "'" );
        return *parsed;
    }
    if ( value.is_number() )
        return value.get<double>();
    throw Error( ErrorCode::Format, layerTag( layerIndex ) + ": expected a number" );
}

} // namespace

Network::Network( std::size_t inputDim,
                  std::vector<Layer> layers,
                  std::optional<std::vector<std::string>> classLabels )
    : _inputDim( inputDim )
    , _layers( std::move( layers ) )
    , _classLabels( std::move( classLabels ) )
{
    validateLayers( _inputDim, _layers );
    if ( _classLabels && _classLabels->size() != outputDim() )
        throw Error( ErrorCode::Dimension, "class_labels length does not match output dimension" );
}

std::size_t Network::reluCount() const
{
    std::size_t count = 0;
    for ( const Layer &layer : _layers )
        if ( layer.activation == Activation::ReLU )
            count += layer.outputDim();
    return count;
}

Network loadNetwork( const std::string &document )
{
    Json doc;
    try
    {
        doc = Json::parse( document );
    }
    catch ( const Json::parse_error &e )
    {
        throw Error( ErrorCode::Format, std::string( "network document: " ) + e.what() );
    }

    if ( !doc.is_object() || !doc.contains( "input_dim" ) || !doc.contains( "layers" ) )
        throw Error( ErrorCode::Format, "network document needs 'input_dim' and 'layers'" );
    if ( !doc["input_dim"].is_number_unsigned() )
        throw Error( ErrorCode::Format, "input_dim must be a positive integer" );
    if ( !doc["layers"].is_array() )
        throw Error( ErrorCode::Format, "'layers' must be an array" );

    std::size_t inputDim = doc["input_dim"].get<std::size_t>();
    std::vector<Layer> layers;
    const Json &jsonLayers = doc["layers"];
    for ( std::size_t i = 0; i < jsonLayers.size(); ++i )
    {
        const Json &jl = jsonLayers[i];
        if ( !jl.is_object() || !jl.contains( "weights" ) || !jl.contains( "biases" ) ||
             !jl.contains( "activation" ) )
            throw Error( ErrorCode::Format, layerTag( i ) + ": needs weights, biases, activation" );

        const Json &w = jl["weights"];
        if ( !w.is_array() || w.empty() || !w[0].is_array() )
            throw Error( ErrorCode::Format, layerTag( i ) + ": weights must be a non-empty matrix" );
        std::size_t cols = w[0].size();
        Layer layer;
        layer.weights = Matrix( w.size(), cols );
        for ( std::size_t r = 0; r < w.size(); ++r )
        {
            if ( !w[r].is_array() || w[r].size() != cols )
                throw Error( ErrorCode::Dimension, layerTag( i ) + ": ragged weight matrix" );
            for ( std::size_t c = 0; c < cols; ++c )
                layer.weights( r, c ) = parseNumber( w[r][c], i );
        }

        const Json &b = jl["biases"];
        if ( !b.is_array() )
            throw Error( ErrorCode::Format, layerTag( i ) + ": biases must be an array" );
        for ( const Json &v : b )
            layer.biases.push_back( parseNumber( v, i ) );

        std::string act = jl["activation"].is_string() ? jl["activation"].get<std::string>() : "";
        if ( act == "relu" )
            layer.activation = Activation::ReLU;
        else if ( act == "identity" )
            layer.activation = Activation::Identity;
        else
            throw Error( ErrorCode::Format, layerTag( i ) + ": unsupported activation '" + act + "'" );

        layers.push_back( std::move( layer ) );
    }

    std::optional<std::vector<std::string>> labels;
    if ( doc.contains( "class_labels" ) )
    {
        if ( !doc["class_labels"].is_array() )
            throw Error( ErrorCode::Format, "class_labels must be an array of strings" );
        labels.emplace();
        for ( const Json &l : doc["class_labels"] )
        {
            if ( !l.is_string() )
                throw Error( ErrorCode::Format, "class_labels must be an array of strings" );
            labels->push_back( l.get<std::string>() );
        }
    }

    return Network( inputDim, std::move( layers ), std::move( labels ) );
}

std::string saveNetwork( const Network &net )
{
    Json doc;
    doc["input_dim"] = net.inputDim();
    Json layers = Json::array();
    for ( const Layer &layer : net.layers() )
    {
        Json jl;
        Json w = Json::array();
        for ( std::size_t r = 0; r < layer.weights.rows(); ++r )
        {
            Json row = Json::array();
            for ( double v : layer.weights.row( r ) )
                row.push_back( formatDouble( v ) );
            w.push_back( std::move( row ) );
        }
        jl["weights"] = std::move( w );
        Json b = Json::array();
        for ( double v : layer.biases )
            b.push_back( formatDouble( v ) );
        jl["biases"] = std::move( b );
        jl["activation"] = layer.activation == Activation::ReLU ? "relu" : "identity";
        layers.push_back( std::move( jl ) );
    }
    doc["layers"] = std::move( layers );
    if ( net.classLabels() )
        doc["class_labels"] = *net.classLabels();
    return doc.dump( 1 ) + "\n";
}

Network loadNetworkFile( const std::string &path )
{
    std::ifstream in( path );
    if ( !in )
        throw Error( ErrorCode::Io, "cannot open network file " + path );
    std::stringstream ss;
    ss << in.rdbuf();
    return loadNetwork( ss.str() );
}

void saveNetworkFile( const Network &net, const std::string &path )
{
    std::ofstream out( path );
    if ( !out )
        throw Error( ErrorCode::Io, "cannot write network file " + path );
    out << saveNetwork( net );
}

Vector applyLayer( const Layer &layer, std::span<const double> input )
{
    Vector out( layer.outputDim() );
    for ( std::size_t r = 0; r < out.size(); ++r )
    {
        double acc = 0.0;
        std::span<const double> row = layer.weights.row( r );
        for ( std::size_t c = 0; c < row.size(); ++c )
            acc += row[c] * input[c];
        acc += layer.biases[r];
        out[r] = layer.activation == Activation::ReLU ? std::max( 0.0, acc ) : acc;
    }
    return out;
}

Vector evaluate( const Network &net, std::span<const double> input )
{
    if ( input.size() != net.inputDim() )
        throw Error( ErrorCode::Dimension,
                     "input length " + std::to_string( input.size() ) + " != network input_dim " +
                         std::to_string( net.inputDim() ) );
    Vector values( input.begin(), input.end() );
    for ( const Layer &layer : net.layers() )
        values = applyLayer( layer, values );
    return values;
}

std::size_t argmax( std::span<const double> scores )
{
    std::size_t best = 0;
    for ( std::size_t i = 1; i < scores.size(); ++i )
        if ( scores[i] > scores[best] )
            best = i;
    return best;
}

std::size_t classify( const Network &net, std::span<const double> input )
{
    return argmax( evaluate( net, input ) );
}

Network prependLayer( const Network &net, Matrix weights, Vector biases )
{
    if ( weights.rows() != net.inputDim() )
        throw Error( ErrorCode::Dimension,
                     "prepended layer has " + std::to_string( weights.rows() ) +
                         " outputs, network expects " + std::to_string( net.inputDim() ) );
    if ( biases.size() != weights.rows() )
        throw Error( ErrorCode::Dimension, "prepended layer bias length mismatch" );

    std::size_t inputDim = weights.cols();
    std::vector<Layer> layers;
    layers.reserve( net.layers().size() + 1 );
    layers.push_back( Layer{ std::move( weights ), std::move( biases ), Activation::Identity } );
    layers.insert( layers.end(), net.layers().begin(), net.layers().end() );
    return Network( inputDim, std::move( layers ), net.classLabels() );
}

} // namespace gridcert
