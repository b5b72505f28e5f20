#include "gridcert/verifier.hpp"

#include "gridcert/error.hpp"
#include "gridcert/float_simplex.hpp"
#include "gridcert/rational_simplex.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

namespace gridcert {

const char *toString( Status status )
{
    switch ( status )
    {
    case Status::SAT:
        return "SAT";
    case Status::UNSAT:
        return "UNSAT";
    case Status::UNKNOWN:
        return "UNKNOWN";
    }
    return "?";
}

std::optional<Status> parseStatus( const std::string &text )
{
    if ( text == "SAT" )
        return Status::SAT;
    if ( text == "UNSAT" )
        return Status::UNSAT;
    if ( text == "UNKNOWN" )
        return Status::UNKNOWN;
    return std::nullopt;
}

void Budget::validate() const
{
    if ( !( maxSeconds > 0.0 ) )
        throw Error( ErrorCode::Range, "budget: max seconds must be positive" );
    if ( maxBranches == 0 )
        throw Error( ErrorCode::Range, "budget: max branches must be positive" );
}

namespace {

using Clock = std::chrono::steady_clock;

double secondsSince( Clock::time_point start )
{
    return std::chrono::duration<double>( Clock::now() - start ).count();
}

// Split decision per ReLU neuron during branch and bound.
enum class Split : std::uint8_t { Free, Active, Inactive };

/*
  The network with every hidden Identity layer folded into its successor,
  in exact rationals, plus a double copy for bound propagation. The ReLU
  neurons are the same as in the source network, in the same order.
*/
struct LinearizedNetwork
{
    struct RationalLayer
    {
        std::size_t rows = 0;
        std::size_t cols = 0;
        std::vector<Rational> weights; // row-major
        std::vector<Rational> biases;
        bool relu = false;

        const Rational &w( std::size_t r, std::size_t c ) const { return weights[r * cols + c]; }
    };

    std::vector<RationalLayer> layers;
    std::shared_ptr<const Network> floatNet;

    explicit LinearizedNetwork( const Network &net );
};

LinearizedNetwork::RationalLayer toRational( const Layer &layer )
{
    LinearizedNetwork::RationalLayer out;
    out.rows = layer.weights.rows();
    out.cols = layer.weights.cols();
    out.weights.reserve( out.rows * out.cols );
    for ( std::size_t r = 0; r < out.rows; ++r )
        for ( double v : layer.weights.row( r ) )
            out.weights.emplace_back( v );
    for ( double v : layer.biases )
        out.biases.emplace_back( v );
    out.relu = layer.activation == Activation::ReLU;
    return out;
}

// outer( inner( x ) ) for affine maps, skipping zero entries.
LinearizedNetwork::RationalLayer compose( const LinearizedNetwork::RationalLayer &outer,
                                          const LinearizedNetwork::RationalLayer &inner )
{
    std::vector<std::vector<std::pair<std::size_t, const Rational *>>> innerNonzeros( inner.rows );
    for ( std::size_t k = 0; k < inner.rows; ++k )
        for ( std::size_t j = 0; j < inner.cols; ++j )
            if ( sgn( inner.w( k, j ) ) != 0 )
                innerNonzeros[k].emplace_back( j, &inner.w( k, j ) );

    LinearizedNetwork::RationalLayer out;
    out.rows = outer.rows;
    out.cols = inner.cols;
    out.weights.assign( out.rows * out.cols, Rational( 0 ) );
    out.biases = outer.biases;
    out.relu = outer.relu;
    for ( std::size_t r = 0; r < outer.rows; ++r )
        for ( std::size_t k = 0; k < outer.cols; ++k )
        {
            const Rational &a = outer.w( r, k );
            if ( sgn( a ) == 0 )
                continue;
            for ( const auto &[j, v] : innerNonzeros[k] )
                out.weights[r * out.cols + j] += a * *v;
            if ( sgn( inner.biases[k] ) != 0 )
                out.biases[r] += a * inner.biases[k];
        }
    return out;
}

LinearizedNetwork::LinearizedNetwork( const Network &net )
{
    const auto &src = net.layers();
    bool folded = false;
    std::optional<RationalLayer> pending;
    for ( std::size_t i = 0; i < src.size(); ++i )
    {
        RationalLayer layer = toRational( src[i] );
        if ( pending )
        {
            layer = compose( layer, *pending );
            pending.reset();
        }
        bool last = i + 1 == src.size();
        if ( !layer.relu && !last )
        {
            pending = std::move( layer );
            folded = true;
            continue;
        }
        layers.push_back( std::move( layer ) );
    }

    if ( !folded )
    {
        floatNet = std::make_shared<const Network>( net );
        return;
    }
    std::vector<Layer> floatLayers;
    for ( const RationalLayer &rl : layers )
    {
        Layer layer;
        layer.weights = Matrix( rl.rows, rl.cols );
        for ( std::size_t r = 0; r < rl.rows; ++r )
            for ( std::size_t c = 0; c < rl.cols; ++c )
                layer.weights( r, c ) = nearestDouble( rl.w( r, c ) );
        for ( const Rational &b : rl.biases )
            layer.biases.push_back( nearestDouble( b ) );
        layer.activation = rl.relu ? Activation::ReLU : Activation::Identity;
        floatLayers.push_back( std::move( layer ) );
    }
    floatNet = std::make_shared<const Network>( net.inputDim(), std::move( floatLayers ) );
}

struct Propagation
{
    NeuronBounds bounds;
    Vector lastInputLower; // post-activation bounds feeding the output layer
    Vector lastInputUpper;
};

// Interval propagation honouring split decisions; nullopt if a split contradicts the bounds.
std::optional<Propagation> propagate( const Network &net, const InputBox &box, const std::vector<Split> *splits )
{
    if ( box.dimension() != net.inputDim() )
        throw Error( ErrorCode::Dimension, "box dimension does not match network input" );

    Propagation out;
    Vector lo = box.lower();
    Vector hi = box.upper();
    std::size_t neuron = 0;
    const auto &layers = net.layers();
    for ( std::size_t li = 0; li < layers.size(); ++li )
    {
        const Layer &layer = layers[li];
        if ( li + 1 == layers.size() )
        {
            out.lastInputLower = lo;
            out.lastInputUpper = hi;
        }
        std::size_t rows = layer.outputDim();
        LayerBounds lb{ Vector( rows ), Vector( rows ) };
        for ( std::size_t r = 0; r < rows; ++r )
        {
            double l = 0.0;
            double u = 0.0;
            std::span<const double> w = layer.weights.row( r );
            for ( std::size_t c = 0; c < w.size(); ++c )
            {
                if ( w[c] >= 0.0 )
                {
                    l += w[c] * lo[c];
                    u += w[c] * hi[c];
                }
                else
                {
                    l += w[c] * hi[c];
                    u += w[c] * lo[c];
                }
            }
            lb.lower[r] = l + layer.biases[r] - BOUND_SLACK;
            lb.upper[r] = u + layer.biases[r] + BOUND_SLACK;
        }

        Vector nextLo( rows ), nextHi( rows );
        for ( std::size_t r = 0; r < rows; ++r )
        {
            double l = lb.lower[r];
            double u = lb.upper[r];
            if ( layer.activation == Activation::Identity )
            {
                nextLo[r] = l;
                nextHi[r] = u;
                continue;
            }
            Split split = splits ? ( *splits )[neuron] : Split::Free;
            Phase phase;
            if ( split == Split::Active )
            {
                if ( u < 0.0 )
                    return std::nullopt;
                l = std::max( l, 0.0 );
                phase = Phase::ActiveFixed;
            }
            else if ( split == Split::Inactive )
            {
                if ( l > 0.0 )
                    return std::nullopt;
                u = std::min( u, 0.0 );
                phase = Phase::InactiveFixed;
            }
            else if ( l >= 0.0 )
                phase = Phase::ActiveFixed;
            else if ( u <= 0.0 )
                phase = Phase::InactiveFixed;
            else
                phase = Phase::Unstable;
            lb.lower[r] = l;
            lb.upper[r] = u;
            out.bounds.phases.push_back( phase );
            nextLo[r] = std::max( l, 0.0 );
            nextHi[r] = std::max( u, 0.0 );
            if ( phase == Phase::InactiveFixed )
                nextLo[r] = nextHi[r] = 0.0;
            ++neuron;
        }
        out.bounds.layers.push_back( std::move( lb ) );
        lo = std::move( nextLo );
        hi = std::move( nextHi );
    }
    return out;
}

// Upper bound of y_j - y_c over the output layer's input box.
double differenceUpper( const Layer &output, const Vector &lo, const Vector &hi, std::size_t c, std::size_t j )
{
    std::span<const double> wj = output.weights.row( j );
    std::span<const double> wc = output.weights.row( c );
    double u = 0.0;
    for ( std::size_t k = 0; k < wj.size(); ++k )
    {
        double d = wj[k] - wc[k];
        u += d >= 0.0 ? d * hi[k] : d * lo[k];
    }
    return u + ( output.biases[j] - output.biases[c] ) + 2 * BOUND_SLACK;
}

/*
  Linear bounds over the input, L( x ) <= z <= U( x ), pushed through the
  network with the usual single-neuron ReLU relaxation and intersected with
  the interval bounds at every neuron. Once the neurons of a layer are all
  fixed, the next layer's bounds are exact up to the slack, which interval
  propagation alone cannot achieve.
*/
struct SymbolicPropagation
{
    Propagation base;
    Vector differenceUpper; // upper bound of y_j - y_c per output j
};

double concreteMax( const Vector &form, const InputBox &box )
{
    double v = form.back();
    for ( std::size_t i = 0; i + 1 < form.size(); ++i )
        v += form[i] >= 0.0 ? form[i] * box.upper()[i] : form[i] * box.lower()[i];
    return v;
}

double concreteMin( const Vector &form, const InputBox &box )
{
    double v = form.back();
    for ( std::size_t i = 0; i + 1 < form.size(); ++i )
        v += form[i] >= 0.0 ? form[i] * box.lower()[i] : form[i] * box.upper()[i];
    return v;
}

std::optional<SymbolicPropagation> symbolicPropagate( const Network &net,
                                                      const InputBox &box,
                                                      const std::vector<Split> &splits,
                                                      std::size_t trueClass )
{
    auto interval = propagate( net, box, &splits );
    if ( !interval )
        return std::nullopt;

    const std::size_t n = net.inputDim();
    SymbolicPropagation out;
    Propagation &p = out.base;
    p.lastInputLower = interval->lastInputLower;
    p.lastInputUpper = interval->lastInputUpper;

    // Post-activation forms of the previous layer, n coefficients plus a constant.
    std::vector<Vector> lowerForms, upperForms;
    for ( std::size_t i = 0; i < n; ++i )
    {
        Vector f( n + 1, 0.0 );
        f[i] = 1.0;
        lowerForms.push_back( f );
        upperForms.push_back( f );
    }
    Vector postLo = box.lower(), postHi = box.upper();

    std::size_t neuron = 0;
    const auto &layers = net.layers();
    for ( std::size_t li = 0; li < layers.size(); ++li )
    {
        const Layer &layer = layers[li];
        const std::size_t rows = layer.outputDim();
        const bool last = li + 1 == layers.size();
        if ( last )
        {
            p.lastInputLower = postLo;
            p.lastInputUpper = postHi;
            out.differenceUpper.assign( rows, 0.0 );
            for ( std::size_t j = 0; j < rows; ++j )
            {
                if ( j == trueClass )
                    continue;
                Vector u( n + 1, 0.0 );
                u[n] = layer.biases[j] - layer.biases[trueClass];
                std::span<const double> wj = layer.weights.row( j ), wc = layer.weights.row( trueClass );
                for ( std::size_t k = 0; k < wj.size(); ++k )
                {
                    double d = wj[k] - wc[k];
                    if ( d == 0.0 )
                        continue;
                    const Vector &src = d > 0.0 ? upperForms[k] : lowerForms[k];
                    for ( std::size_t i = 0; i <= n; ++i )
                        u[i] += d * src[i];
                }
                double symbolic = concreteMax( u, box ) + 2 * BOUND_SLACK;
                double plain = differenceUpper( layer, postLo, postHi, trueClass, j );
                out.differenceUpper[j] = std::min( symbolic, plain );
            }
            p.bounds.layers.push_back( interval->bounds.layers[li] );
            break;
        }

        LayerBounds lb = interval->bounds.layers[li];
        std::vector<Vector> nextLower( rows ), nextUpper( rows );
        Vector nextLo( rows ), nextHi( rows );
        for ( std::size_t r = 0; r < rows; ++r )
        {
            Vector lf( n + 1, 0.0 ), uf( n + 1, 0.0 );
            lf[n] = uf[n] = layer.biases[r];
            std::span<const double> w = layer.weights.row( r );
            for ( std::size_t k = 0; k < w.size(); ++k )
            {
                if ( w[k] == 0.0 )
                    continue;
                const Vector &forLower = w[k] > 0.0 ? lowerForms[k] : upperForms[k];
                const Vector &forUpper = w[k] > 0.0 ? upperForms[k] : lowerForms[k];
                for ( std::size_t i = 0; i <= n; ++i )
                {
                    lf[i] += w[k] * forLower[i];
                    uf[i] += w[k] * forUpper[i];
                }
            }
            lf[n] -= BOUND_SLACK;
            uf[n] += BOUND_SLACK;
            double l = std::max( lb.lower[r], concreteMin( lf, box ) - BOUND_SLACK );
            double u = std::min( lb.upper[r], concreteMax( uf, box ) + BOUND_SLACK );

            if ( layer.activation == Activation::Identity )
            {
                lb.lower[r] = l;
                lb.upper[r] = u;
                nextLower[r] = std::move( lf );
                nextUpper[r] = std::move( uf );
                nextLo[r] = l;
                nextHi[r] = u;
                continue;
            }

            Split split = splits[neuron];
            if ( split == Split::Active )
                l = std::max( l, 0.0 );
            else if ( split == Split::Inactive )
                u = std::min( u, 0.0 );
            if ( l > u )
                return std::nullopt;
            Phase phase;
            if ( split == Split::Active || l >= 0.0 )
                phase = Phase::ActiveFixed;
            else if ( split == Split::Inactive || u <= 0.0 )
                phase = Phase::InactiveFixed;
            else
                phase = Phase::Unstable;
            lb.lower[r] = l;
            lb.upper[r] = u;
            p.bounds.phases.push_back( phase );

            if ( phase == Phase::ActiveFixed )
            {
                nextLower[r] = std::move( lf );
                nextUpper[r] = std::move( uf );
                nextLo[r] = std::max( l, 0.0 );
                nextHi[r] = std::max( u, 0.0 );
            }
            else if ( phase == Phase::InactiveFixed )
            {
                nextLower[r] = Vector( n + 1, 0.0 );
                nextUpper[r] = Vector( n + 1, 0.0 );
                nextLo[r] = nextHi[r] = 0.0;
            }
            else
            {
                // relu( z ) <= s ( z - l ) on [l, u]; relu( z ) >= z or >= 0.
                double s = u / ( u - l );
                for ( std::size_t i = 0; i <= n; ++i )
                    uf[i] *= s;
                uf[n] -= s * l;
                uf[n] += BOUND_SLACK;
                nextUpper[r] = std::move( uf );
                nextLower[r] = u > -l ? std::move( lf ) : Vector( n + 1, 0.0 );
                nextLo[r] = 0.0;
                nextHi[r] = u;
            }
            ++neuron;
        }
        p.bounds.layers.push_back( std::move( lb ) );
        lowerForms = std::move( nextLower );
        upperForms = std::move( nextUpper );
        postLo = std::move( nextLo );
        postHi = std::move( nextHi );
    }
    return out;
}

/*
  Exact encoding of the network over a box, one variable triple per ReLU
  neuron: pre-activation z, post-activation h and q = h - z. Fixing a phase
  only tightens bounds ( active: z >= 0, q = 0; inactive: z <= 0, h = 0 ), so
  related regions are solved incrementally on the same tableau. Neurons left
  free are unconstrained, which relaxes the problem.
*/
class ExactRegionSolver
{
public:
    ExactRegionSolver( const LinearizedNetwork &lin, const InputBox &box, const OutputProperty &property );

    void setPhase( std::size_t neuron, Split split );
    void push() { _simplex.pushBounds(); }
    void pop() { _simplex.popBounds(); }

    bool feasible() { return _simplex.check(); }

    /// After feasible(): a point of the region where y_j >= y_c, maximizing y_j - y_c.
    std::optional<std::vector<Rational>> witnessFor( std::size_t j );

    std::size_t neuronCount() const { return _z.size(); }

private:
    RationalSimplex _simplex;
    std::vector<std::size_t> _inputs;
    std::vector<std::size_t> _z;
    std::vector<std::size_t> _h;
    std::vector<std::size_t> _q;
    std::vector<std::optional<std::size_t>> _difference; // per output j; nullopt for the true class
    std::vector<Rational> _differenceOffset;
};

ExactRegionSolver::ExactRegionSolver( const LinearizedNetwork &lin,
                                      const InputBox &box,
                                      const OutputProperty &property )
{
    for ( std::size_t i = 0; i < box.dimension(); ++i )
    {
        std::size_t x = _simplex.addVariable();
        _simplex.setBounds( x, Rational( box.lower()[i] ), Rational( box.upper()[i] ) );
        _inputs.push_back( x );
    }

    std::vector<std::size_t> previous = _inputs;
    for ( std::size_t li = 0; li + 1 < lin.layers.size(); ++li )
    {
        const auto &layer = lin.layers[li];
        std::vector<std::size_t> current;
        for ( std::size_t r = 0; r < layer.rows; ++r )
        {
            std::size_t z = _simplex.addVariable();
            std::size_t h = _simplex.addVariable();
            _z.push_back( z );
            _h.push_back( h );
            current.push_back( h );
        }
        for ( std::size_t r = 0; r < layer.rows; ++r )
        {
            std::vector<RationalSimplex::Term> terms{ { _z[_z.size() - layer.rows + r], Rational( 1 ) } };
            for ( std::size_t c = 0; c < layer.cols; ++c )
                if ( sgn( layer.w( r, c ) ) != 0 )
                    terms.emplace_back( previous[c], -layer.w( r, c ) );
            std::size_t def = _simplex.addRow( terms );
            _simplex.setBounds( def, layer.biases[r], layer.biases[r] );
        }
        for ( std::size_t r = 0; r < layer.rows; ++r )
        {
            std::size_t idx = _z.size() - layer.rows + r;
            _q.push_back( _simplex.addRow( { { _h[idx], Rational( 1 ) }, { _z[idx], Rational( -1 ) } } ) );
        }
        previous = std::move( current );
    }

    const auto &out = lin.layers.back();
    std::size_t c = property.trueClass();
    _difference.resize( out.rows );
    _differenceOffset.resize( out.rows );
    for ( std::size_t j = 0; j < out.rows; ++j )
    {
        if ( j == c )
            continue;
        std::vector<RationalSimplex::Term> terms;
        for ( std::size_t k = 0; k < out.cols; ++k )
        {
            Rational d = out.w( j, k ) - out.w( c, k );
            if ( sgn( d ) != 0 )
                terms.emplace_back( previous[k], d );
        }
        _difference[j] = _simplex.addRow( terms );
        _differenceOffset[j] = out.biases[j] - out.biases[c];
    }
}

void ExactRegionSolver::setPhase( std::size_t neuron, Split split )
{
    std::size_t z = _z[neuron], h = _h[neuron], q = _q[neuron];
    _simplex.clearBounds( z );
    _simplex.clearBounds( h );
    _simplex.clearBounds( q );
    if ( split == Split::Active )
    {
        _simplex.setLower( z, Rational( 0 ) );
        _simplex.setBounds( q, Rational( 0 ), Rational( 0 ) );
    }
    else if ( split == Split::Inactive )
    {
        _simplex.setUpper( z, Rational( 0 ) );
        _simplex.setBounds( h, Rational( 0 ), Rational( 0 ) );
    }
}

std::optional<std::vector<Rational>> ExactRegionSolver::witnessFor( std::size_t j )
{
    if ( !_difference[j] )
        return std::nullopt;
    std::size_t d = *_difference[j];
    auto kind = _simplex.maximize( d );
    if ( kind == RationalSimplex::OptimumKind::Optimal && _simplex.value( d ) + _differenceOffset[j] < 0 )
        return std::nullopt;
    std::vector<Rational> point;
    point.reserve( _inputs.size() );
    for ( std::size_t x : _inputs )
        point.push_back( _simplex.value( x ) );
    return point;
}

bool witnessHolds( const Network &net, const InputBox &box, const OutputProperty &property, const Vector &w )
{
    return box.contains( w ) && property.satisfiedBy( evaluate( net, w ) );
}

// Round to doubles; if the rounded point fails, step towards the box centre by up to 1e-7.
std::pair<Vector, bool> roundWitness( const std::vector<Rational> &exact,
                                      const Network &net,
                                      const InputBox &box,
                                      const OutputProperty &property )
{
    Vector w( exact.size() );
    for ( std::size_t i = 0; i < w.size(); ++i )
        w[i] = std::clamp( nearestDouble( exact[i] ), box.lower()[i], box.upper()[i] );
    if ( witnessHolds( net, box, property, w ) )
        return { w, true };

    Vector center = box.center();
    for ( double step : { 1e-9, 1e-8, 1e-7 } )
    {
        Vector moved = w;
        for ( std::size_t i = 0; i < moved.size(); ++i )
        {
            double gap = center[i] - w[i];
            moved[i] = w[i] + std::copysign( std::min( step, std::abs( gap ) ), gap );
        }
        if ( witnessHolds( net, box, property, moved ) )
            return { moved, true };
    }
    return { w, false };
}

std::vector<Split> patternToSplits( const Pattern &pattern )
{
    std::vector<Split> splits( pattern.size() );
    for ( std::size_t i = 0; i < pattern.size(); ++i )
        splits[i] = pattern[i] ? Split::Active : Split::Inactive;
    return splits;
}

struct LeafOutcome
{
    bool feasible = false;
    Vector witness;
    bool witnessValid = false;
};

/*
  Affine forms, over the network input, of every ReLU pre-activation (rows
  0..R-1) and of every output difference y_j - y_c (rows R..R+k-1) when the
  activation pattern is fixed.
*/
template <typename T> struct AffineForms
{
    std::vector<std::vector<T>> coeffs;
    std::vector<T> offsets;
};

std::size_t rowsOf( const Layer &l ) { return l.weights.rows(); }
std::size_t colsOf( const Layer &l ) { return l.weights.cols(); }
double weightOf( const Layer &l, std::size_t r, std::size_t c ) { return l.weights( r, c ); }
double biasOf( const Layer &l, std::size_t r ) { return l.biases[r]; }
bool reluOf( const Layer &l ) { return l.activation == Activation::ReLU; }

std::size_t rowsOf( const LinearizedNetwork::RationalLayer &l ) { return l.rows; }
std::size_t colsOf( const LinearizedNetwork::RationalLayer &l ) { return l.cols; }
const Rational &weightOf( const LinearizedNetwork::RationalLayer &l, std::size_t r, std::size_t c ) { return l.w( r, c ); }
const Rational &biasOf( const LinearizedNetwork::RationalLayer &l, std::size_t r ) { return l.biases[r]; }
bool reluOf( const LinearizedNetwork::RationalLayer &l ) { return l.relu; }

bool isZero( double v ) { return v == 0.0; }
bool isZero( const Rational &v ) { return sgn( v ) == 0; }

template <typename T, typename LayerT>
AffineForms<T> patternForms( const std::vector<LayerT> &layers, std::size_t inputDim, const std::vector<Split> &splits, std::size_t c )
{
    AffineForms<T> out;
    std::vector<std::vector<T>> prevCoeffs;
    std::vector<T> prevOffsets;
    std::vector<bool> prevLive;
    std::size_t neuron = 0;
    for ( std::size_t li = 0; li < layers.size(); ++li )
    {
        const LayerT &layer = layers[li];
        std::size_t rows = rowsOf( layer );
        std::vector<std::vector<T>> coeffs( rows, std::vector<T>( inputDim, T( 0 ) ) );
        std::vector<T> offsets( rows, T( 0 ) );
        for ( std::size_t r = 0; r < rows; ++r )
        {
            offsets[r] = biasOf( layer, r );
            for ( std::size_t k = 0; k < colsOf( layer ); ++k )
            {
                const auto &w = weightOf( layer, r, k );
                if ( isZero( w ) )
                    continue;
                if ( li == 0 )
                {
                    coeffs[r][k] += w;
                    continue;
                }
                if ( !prevLive[k] )
                    continue;
                for ( std::size_t x = 0; x < inputDim; ++x )
                    if ( !isZero( prevCoeffs[k][x] ) )
                        coeffs[r][x] += w * prevCoeffs[k][x];
                offsets[r] += w * prevOffsets[k];
            }
        }
        if ( li + 1 == layers.size() )
        {
            for ( std::size_t j = 0; j < rows; ++j )
            {
                std::vector<T> d( inputDim );
                for ( std::size_t x = 0; x < inputDim; ++x )
                    d[x] = coeffs[j][x] - coeffs[c][x];
                out.coeffs.push_back( std::move( d ) );
                out.offsets.push_back( offsets[j] - offsets[c] );
            }
            break;
        }
        prevLive.assign( rows, true );
        for ( std::size_t r = 0; r < rows; ++r )
        {
            if ( !reluOf( layer ) )
                continue;
            out.coeffs.push_back( coeffs[r] );
            out.offsets.push_back( offsets[r] );
            prevLive[r] = splits[neuron++] == Split::Active;
        }
        prevCoeffs = std::move( coeffs );
        prevOffsets = std::move( offsets );
    }
    return out;
}

struct ExactBound
{
    std::optional<Rational> lower;
    std::optional<Rational> upper;
};

/*
  One fully fixed region: sign constraints on every ReLU pre-activation and
  y_j >= y_c for some candidate j. A double simplex proposes an answer; it
  is accepted only after an exact check (a vertex solved in rationals for
  feasibility, an interval argument on the simplex's row multipliers for
  infeasibility). When neither check goes through the region is decided by
  the exact simplex.
*/
class LeafSolver
{
public:
    LeafSolver( const LinearizedNetwork &lin, const InputBox &box, std::size_t trueClass )
        : _lin( lin )
        , _box( box )
        , _trueClass( trueClass )
    {
        for ( double v : box.lower() )
            _boxLower.emplace_back( v );
        for ( double v : box.upper() )
            _boxUpper.emplace_back( v );
    }

    LeafOutcome solve( const std::vector<Split> &splits,
                       const std::vector<std::size_t> &candidates,
                       const Network &net,
                       const OutputProperty &property );

    std::size_t fallbacks() const { return _fallbacks; }

private:
    const AffineForms<Rational> &exact();
    std::vector<ExactBound> exactBounds( std::optional<std::size_t> difference ) const;
    bool certifiesInfeasible( const std::vector<double> &mu, const std::vector<ExactBound> &bounds );
    std::optional<std::vector<Rational>> exactVertex( const FloatSimplex &fs, const std::vector<ExactBound> &bounds );
    std::optional<std::vector<Rational>> exactRegion( std::size_t difference );
    bool satisfies( const std::vector<Rational> &x, const std::vector<ExactBound> &bounds );

    const LinearizedNetwork &_lin;
    const InputBox &_box;
    std::size_t _trueClass;
    std::vector<Rational> _boxLower, _boxUpper;
    const std::vector<Split> *_splits = nullptr;
    std::optional<AffineForms<Rational>> _exact;
    std::size_t _neurons = 0;
    std::size_t _fallbacks = 0;
};

const AffineForms<Rational> &LeafSolver::exact()
{
    if ( !_exact )
        _exact = patternForms<Rational>( _lin.layers, _box.dimension(), *_splits, _trueClass );
    return *_exact;
}

std::vector<ExactBound> LeafSolver::exactBounds( std::optional<std::size_t> difference ) const
{
    const AffineForms<Rational> &forms = *_exact;
    std::vector<ExactBound> bounds( forms.coeffs.size() );
    for ( std::size_t k = 0; k < _neurons; ++k )
    {
        if ( ( *_splits )[k] == Split::Active )
            bounds[k].lower = -forms.offsets[k];
        else
            bounds[k].upper = -forms.offsets[k];
    }
    if ( difference )
        bounds[_neurons + *difference].lower = -forms.offsets[_neurons + *difference];
    return bounds;
}

// sum_i mu_i s_i equals g( x ) = sum_i mu_i a_i . x; infeasible if their ranges cannot meet.
bool LeafSolver::certifiesInfeasible( const std::vector<double> &mu, const std::vector<ExactBound> &bounds )
{
    const AffineForms<Rational> &forms = exact();
    std::size_t n = _box.dimension();
    std::vector<Rational> g( n, Rational( 0 ) );
    std::optional<Rational> sLower = Rational( 0 ), sUpper = Rational( 0 );
    for ( std::size_t i = 0; i < mu.size(); ++i )
    {
        if ( mu[i] == 0.0 || !std::isfinite( mu[i] ) )
        {
            if ( !std::isfinite( mu[i] ) )
                return false;
            continue;
        }
        Rational m( mu[i] );
        for ( std::size_t x = 0; x < n; ++x )
            if ( sgn( forms.coeffs[i][x] ) != 0 )
                g[x] += m * forms.coeffs[i][x];
        const std::optional<Rational> &lowSide = m > 0 ? bounds[i].lower : bounds[i].upper;
        const std::optional<Rational> &highSide = m > 0 ? bounds[i].upper : bounds[i].lower;
        if ( sLower && lowSide )
            *sLower += m * *lowSide;
        else
            sLower.reset();
        if ( sUpper && highSide )
            *sUpper += m * *highSide;
        else
            sUpper.reset();
    }
    Rational gMin = 0, gMax = 0;
    for ( std::size_t x = 0; x < n; ++x )
    {
        int s = sgn( g[x] );
        if ( s > 0 )
        {
            gMin += g[x] * _boxLower[x];
            gMax += g[x] * _boxUpper[x];
        }
        else if ( s < 0 )
        {
            gMin += g[x] * _boxUpper[x];
            gMax += g[x] * _boxLower[x];
        }
    }
    return ( sLower && gMax < *sLower ) || ( sUpper && gMin > *sUpper );
}

bool LeafSolver::satisfies( const std::vector<Rational> &x, const std::vector<ExactBound> &bounds )
{
    const AffineForms<Rational> &forms = exact();
    for ( std::size_t i = 0; i < x.size(); ++i )
        if ( x[i] < _boxLower[i] || x[i] > _boxUpper[i] )
            return false;
    for ( std::size_t r = 0; r < bounds.size(); ++r )
    {
        if ( !bounds[r].lower && !bounds[r].upper )
            continue;
        Rational s = 0;
        for ( std::size_t i = 0; i < x.size(); ++i )
            if ( sgn( forms.coeffs[r][i] ) != 0 )
                s += forms.coeffs[r][i] * x[i];
        if ( ( bounds[r].lower && s < *bounds[r].lower ) || ( bounds[r].upper && s > *bounds[r].upper ) )
            return false;
    }
    return true;
}

// The basic solution of the simplex's final basis, recomputed exactly.
std::optional<std::vector<Rational>> LeafSolver::exactVertex( const FloatSimplex &fs, const std::vector<ExactBound> &bounds )
{
    const AffineForms<Rational> &forms = exact();
    std::size_t n = fs.structuralCount();
    auto exactValue = [&]( std::size_t var, const std::optional<Rational> &lo, const std::optional<Rational> &hi ) {
        double v = fs.value( var );
        if ( fs.lower( var ) && v == *fs.lower( var ) && lo )
            return *lo;
        if ( fs.upper( var ) && v == *fs.upper( var ) && hi )
            return *hi;
        return Rational( v );
    };

    std::vector<Rational> x( n );
    std::vector<std::size_t> basicInputs;
    for ( std::size_t j = 0; j < n; ++j )
    {
        if ( fs.isBasic( j ) )
            basicInputs.push_back( j );
        else
            x[j] = exactValue( j, _boxLower[j], _boxUpper[j] );
    }
    std::vector<std::size_t> tightRows;
    for ( std::size_t r = 0; r < fs.rowCount(); ++r )
        if ( !fs.isBasic( fs.rowVariable( r ) ) )
            tightRows.push_back( r );
    std::size_t k = basicInputs.size();
    if ( tightRows.size() != k )
        return std::nullopt;

    // Solve sum_{j basic} a_rj x_j = t_r - sum_{j nonbasic} a_rj x_j.
    std::vector<std::vector<Rational>> m( k, std::vector<Rational>( k + 1 ) );
    for ( std::size_t i = 0; i < k; ++i )
    {
        std::size_t r = tightRows[i];
        Rational rhs = exactValue( fs.rowVariable( r ), bounds[r].lower, bounds[r].upper );
        for ( std::size_t j = 0; j < n; ++j )
            if ( !fs.isBasic( j ) && sgn( forms.coeffs[r][j] ) != 0 )
                rhs -= forms.coeffs[r][j] * x[j];
        for ( std::size_t c = 0; c < k; ++c )
            m[i][c] = forms.coeffs[r][basicInputs[c]];
        m[i][k] = rhs;
    }
    for ( std::size_t col = 0; col < k; ++col )
    {
        std::size_t p = col;
        while ( p < k && sgn( m[p][col] ) == 0 )
            ++p;
        if ( p == k )
            return std::nullopt;
        std::swap( m[p], m[col] );
        for ( std::size_t i = 0; i < k; ++i )
        {
            if ( i == col || sgn( m[i][col] ) == 0 )
                continue;
            Rational f = m[i][col] / m[col][col];
            for ( std::size_t c = col; c <= k; ++c )
                if ( sgn( m[col][c] ) != 0 )
                    m[i][c] -= f * m[col][c];
        }
    }
    for ( std::size_t i = 0; i < k; ++i )
        x[basicInputs[i]] = m[i][k] / m[i][i];
    if ( !satisfies( x, bounds ) )
        return std::nullopt;
    return x;
}

// Exact simplex on the region's own constraints; y_j - y_c is maximized for a robust witness.
std::optional<std::vector<Rational>> LeafSolver::exactRegion( std::size_t difference )
{
    ++_fallbacks;
    const AffineForms<Rational> &forms = exact();
    std::vector<ExactBound> bounds = exactBounds( difference );
    RationalSimplex rs;
    std::size_t n = _box.dimension();
    for ( std::size_t i = 0; i < n; ++i )
    {
        rs.addVariable();
        rs.setBounds( i, _boxLower[i], _boxUpper[i] );
    }
    std::optional<std::size_t> objective;
    for ( std::size_t r = 0; r < bounds.size(); ++r )
    {
        if ( !bounds[r].lower && !bounds[r].upper )
            continue;
        std::vector<RationalSimplex::Term> terms;
        for ( std::size_t i = 0; i < n; ++i )
            if ( sgn( forms.coeffs[r][i] ) != 0 )
                terms.emplace_back( i, forms.coeffs[r][i] );
        std::size_t s = rs.addRow( terms );
        if ( bounds[r].lower )
            rs.setLower( s, *bounds[r].lower );
        if ( bounds[r].upper )
            rs.setUpper( s, *bounds[r].upper );
        if ( r == _neurons + difference )
            objective = s;
    }
    if ( !rs.check() )
        return std::nullopt;
    if ( objective )
        rs.maximize( *objective );
    std::vector<Rational> x;
    for ( std::size_t i = 0; i < n; ++i )
        x.push_back( rs.value( i ) );
    return x;
}

LeafOutcome LeafSolver::solve( const std::vector<Split> &splits,
                               const std::vector<std::size_t> &candidates,
                               const Network &net,
                               const OutputProperty &property )
{
    _splits = &splits;
    _exact.reset();
    _neurons = splits.size();

    LeafOutcome out;
    AffineForms<double> forms = patternForms<double>( _lin.floatNet->layers(), _box.dimension(), splits, _trueClass );
    FloatSimplex fs( _box.lower(), _box.upper(), forms.coeffs );
    for ( std::size_t k = 0; k < _neurons; ++k )
    {
        if ( splits[k] == Split::Active )
            fs.setRowBounds( k, -forms.offsets[k], std::nullopt );
        else
            fs.setRowBounds( k, std::nullopt, -forms.offsets[k] );
    }

    auto accept = [&]( const std::vector<Rational> &point ) {
        auto [w, valid] = roundWitness( point, net, _box, property );
        if ( !out.feasible || valid )
        {
            out.feasible = true;
            out.witness = std::move( w );
            out.witnessValid = valid;
        }
        return valid;
    };

    FloatSimplex::Outcome base = fs.check();
    if ( base == FloatSimplex::Outcome::Infeasible )
    {
        exact();
        if ( certifiesInfeasible( fs.conflict(), exactBounds( std::nullopt ) ) )
            return out;
    }
    bool floatUsable = base == FloatSimplex::Outcome::Feasible;

    for ( std::size_t j : candidates )
    {
        std::optional<std::vector<Rational>> point;
        bool decided = false;
        if ( floatUsable )
        {
            std::size_t row = _neurons + j;
            fs.setRowBounds( row, -forms.offsets[row], std::nullopt );
            FloatSimplex::Outcome o = fs.check();
            if ( o == FloatSimplex::Outcome::Infeasible )
            {
                exact();
                decided = certifiesInfeasible( fs.conflict(), exactBounds( j ) );
            }
            else if ( o == FloatSimplex::Outcome::Feasible )
            {
                exact();
                fs.maximizeRow( row );
                exact();
                point = exactVertex( fs, exactBounds( j ) );
                decided = point.has_value();
            }
            fs.setRowBounds( row, std::nullopt, std::nullopt );
            if ( o == FloatSimplex::Outcome::Stalled )
                floatUsable = false;
        }
        if ( !decided )
            point = exactRegion( j );
        if ( point && accept( *point ) )
            break;
    }
    return out;
}

std::vector<std::size_t> allOtherClasses( const OutputProperty &property )
{
    std::vector<std::size_t> out;
    for ( std::size_t j = 0; j < property.numClasses(); ++j )
        if ( j != property.trueClass() )
            out.push_back( j );
    return out;
}

void checkQueryShape( const VerificationQuery &query )
{
    if ( !query.network )
        throw Error( ErrorCode::Precondition, "query has no network" );
    if ( query.inputBox.dimension() != query.network->inputDim() )
        throw Error( ErrorCode::Dimension, "query box dimension does not match network input" );
    if ( query.property.numClasses() != query.network->outputDim() )
        throw Error( ErrorCode::Dimension, "query property class count does not match network output" );
}

} // namespace

NeuronBounds intervalPropagate( const Network &net, const InputBox &box )
{
    return propagate( net, box, nullptr )->bounds;
}

LeafResult leafFeasible( const Network &net, const InputBox &box, const Pattern &pattern, const OutputProperty &property )
{
    if ( pattern.size() != net.reluCount() )
        throw Error( ErrorCode::Dimension, "pattern length does not match ReLU count" );
    if ( box.dimension() != net.inputDim() )
        throw Error( ErrorCode::Dimension, "box dimension does not match network input" );
    LinearizedNetwork lin( net );
    LeafSolver solver( lin, box, property.trueClass() );
    LeafOutcome leaf = solver.solve( patternToSplits( pattern ), allOtherClasses( property ), net, property );
    LeafResult result;
    result.feasible = leaf.feasible;
    if ( leaf.feasible )
        result.witness = std::move( leaf.witness );
    result.witnessValid = leaf.witnessValid;
    return result;
}

bool validateWitness( const VerificationQuery &query, const Vector &witness )
{
    if ( witness.size() != query.network->inputDim() )
        throw Error( ErrorCode::Dimension, "witness dimension does not match query network input" );
    return witnessHolds( *query.network, query.inputBox, query.property, witness );
}

Verdict verify( const VerificationQuery &query, const Budget &budget )
{
    budget.validate();
    checkQueryShape( query );
    auto start = Clock::now();
    Verdict verdict;

    try
    {
        const Network &net = *query.network;
        LinearizedNetwork lin( net );
        const Network &flat = *lin.floatNet;
        const Layer &outputLayer = flat.layers().back();
        const std::size_t c = query.property.trueClass();
        LeafSolver solver( lin, query.inputBox, c );
        bool roundingFailure = false;

        std::vector<std::vector<Split>> stack;
        stack.emplace_back( net.reluCount(), Split::Free );
        while ( !stack.empty() )
        {
            if ( verdict.stats.branches >= budget.maxBranches )
            {
                verdict.status = Status::UNKNOWN;
                verdict.reason = "branch budget";
                verdict.stats.seconds = secondsSince( start );
                return verdict;
            }
            if ( secondsSince( start ) > budget.maxSeconds )
            {
                verdict.status = Status::UNKNOWN;
                verdict.reason = "time budget";
                verdict.stats.seconds = secondsSince( start );
                return verdict;
            }

            std::vector<Split> splits = std::move( stack.back() );
            stack.pop_back();
            ++verdict.stats.branches;

            auto sym = symbolicPropagate( flat, query.inputBox, splits, c );
            if ( !sym )
                continue;
            const Propagation *prop = &sym->base;

            std::vector<std::size_t> candidates;
            for ( std::size_t j = 0; j < outputLayer.outputDim(); ++j )
                if ( j != c && sym->differenceUpper[j] >= 0.0 )
                    candidates.push_back( j );
            if ( candidates.empty() )
                continue;

            // Widest unstable neuron, lowest index on ties.
            std::optional<std::size_t> branchOn;
            double widest = -1.0;
            std::size_t neuron = 0;
            for ( std::size_t li = 0; li < flat.layers().size(); ++li )
            {
                if ( flat.layers()[li].activation != Activation::ReLU )
                    continue;
                const LayerBounds &lb = prop->bounds.layers[li];
                for ( std::size_t r = 0; r < lb.lower.size(); ++r, ++neuron )
                {
                    if ( prop->bounds.phases[neuron] != Phase::Unstable )
                        continue;
                    double width = lb.upper[r] - lb.lower[r];
                    if ( width > widest )
                    {
                        widest = width;
                        branchOn = neuron;
                    }
                }
            }

            if ( branchOn )
            {
                std::vector<Split> inactive = splits;
                inactive[*branchOn] = Split::Inactive;
                splits[*branchOn] = Split::Active;
                stack.push_back( std::move( inactive ) );
                stack.push_back( std::move( splits ) );
                continue;
            }

            // Every neuron has a known phase: decide the region exactly.
            std::vector<Split> leafSplits( prop->bounds.phases.size() );
            for ( std::size_t k = 0; k < leafSplits.size(); ++k )
                leafSplits[k] = prop->bounds.phases[k] == Phase::ActiveFixed ? Split::Active : Split::Inactive;
            ++verdict.stats.leafChecks;
            LeafOutcome leaf = solver.solve( leafSplits, candidates, net, query.property );
            if ( leaf.feasible && leaf.witnessValid )
            {
                verdict.status = Status::SAT;
                verdict.witness = std::move( leaf.witness );
                verdict.stats.seconds = secondsSince( start );
                return verdict;
            }
            if ( leaf.feasible )
                roundingFailure = true;
        }

        verdict.status = roundingFailure ? Status::UNKNOWN : Status::UNSAT;
        if ( roundingFailure )
            verdict.reason = "witness rounding";
    }
    catch ( const std::exception &e )
    {
        verdict.status = Status::UNKNOWN;
        verdict.witness.reset();
        verdict.reason = std::string( "internal: " ) + e.what();
    }
    verdict.stats.seconds = secondsSince( start );
    return verdict;
}

Verdict enumerateOracle( const VerificationQuery &query )
{
    checkQueryShape( query );
    const Network &net = *query.network;
    std::size_t relus = net.reluCount();
    if ( relus > ORACLE_RELU_CAP )
        throw Error( ErrorCode::Precondition,
                     "enumeration oracle is capped at " + std::to_string( ORACLE_RELU_CAP ) + " ReLUs, network has " +
                         std::to_string( relus ) );

    auto start = Clock::now();
    LinearizedNetwork lin( net );
    ExactRegionSolver solver( lin, query.inputBox, query.property );
    std::vector<std::size_t> candidates = allOtherClasses( query.property );
    Verdict verdict;
    verdict.status = Status::UNSAT;

    /*
      Patterns are enumerated neuron by neuron. A prefix whose exact
      constraint system is already infeasible has no feasible completion,
      so its subtree is skipped without changing the answer.
    */
    std::vector<Split> splits( relus, Split::Free );
    auto recurse = [&]( auto &self, std::size_t neuron ) -> bool {
        if ( neuron == relus )
        {
            ++verdict.stats.leafChecks;
            for ( std::size_t j : candidates )
            {
                auto point = solver.witnessFor( j );
                if ( !point )
                    continue;
                auto [w, valid] = roundWitness( *point, net, query.inputBox, query.property );
                verdict.status = Status::SAT;
                if ( valid )
                    verdict.witness = std::move( w );
                return true;
            }
            return false;
        }
        for ( Split s : { Split::Active, Split::Inactive } )
        {
            solver.push();
            solver.setPhase( neuron, s );
            ++verdict.stats.branches;
            bool found = solver.feasible() && self( self, neuron + 1 );
            solver.pop();
            if ( found )
                return true;
        }
        return false;
    };

    if ( solver.feasible() )
        recurse( recurse, 0 );
    verdict.stats.seconds = secondsSince( start );
    return verdict;
}

} // namespace gridcert
