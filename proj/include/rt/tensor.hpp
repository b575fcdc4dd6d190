#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rt/rng.hpp"

namespace rt {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major float64 tensor with a gradient slot and a reverse-mode
// recipe. Ops record parents and a backward closure on the output; backward()
// replays closures in exact reverse creation order, so gradients are
// deterministic (fixed reduction order, no parallel races).
class Tensor : public std::enable_shared_from_this<Tensor> {
public:
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // lazily allocated, same length as data

    std::vector<TensorPtr> parents;
    std::function<void(Tensor&)> backward_fn;  // null on leaves
    std::uint64_t seq = 0;                     // creation order

    Tensor(Shape s, std::vector<double> d, bool req_grad);
    ~Tensor();
    Tensor(const Tensor&) = delete;
    Tensor& operator=(const Tensor&) = delete;

    std::size_t size() const { return data.size(); }
    bool is_scalar() const { return data.size() == 1; }
    double scalar_value() const;
    bool is_leaf() const { return !backward_fn; }

    void ensure_grad();
    void zero_grad();
};

TensorPtr tensor(Shape shape, std::vector<double> data, bool requires_grad = false);
TensorPtr zeros(Shape shape, bool requires_grad = false);
TensorPtr full(Shape shape, double value, bool requires_grad = false);
TensorPtr scalar_tensor(double value, bool requires_grad = false);
TensorPtr uniform_tensor(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false);
// Glorot-uniform init for rank-2 weights: a = sqrt(6 / (fan_in + fan_out)).
TensorPtr glorot_tensor(std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Live/peak data bytes across all Tensor instances; used by the scaling
// benchmark to report activation footprint.
std::size_t live_tensor_bytes();
std::size_t peak_tensor_bytes();
void reset_peak_tensor_bytes();

// The ordered record of all tensors reachable from a root. `order` is sorted
// by creation order, which is a topological order of the executed ops.
struct Tape {
    std::vector<TensorPtr> order;
    static Tape trace(const TensorPtr& root);
};

// Reverse-mode pass from a scalar root. Intermediate gradients are reset per
// call; leaf gradients accumulate across calls until zeroed.
void backward(const TensorPtr& root);

// ---- primitives -----------------------------------------------------------

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& a, double c);
// rows of m plus a length-C bias vector
TensorPtr add_bias(const TensorPtr& m, const TensorPtr& bias);
TensorPtr relu(const TensorPtr& x);
TensorPtr concat_last_axis(const std::vector<TensorPtr>& parts);
TensorPtr sum(const TensorPtr& x);
TensorPtr mean(const TensorPtr& x);
// rank-2: axis 0 or 1; rank-3: axis 1. Gradient goes to the first argmax.
TensorPtr max_over_axis(const TensorPtr& x, std::size_t axis);
// Row-stabilized softmax. mask (same shape, 1=keep / 0=drop) forces dropped
// entries to exactly 0; a fully masked row is an error.
TensorPtr softmax_rows(const TensorPtr& x, const TensorPtr& mask = nullptr);
// Per-vector normalization over the last axis, then gain ⊙ x + bias.
TensorPtr layernorm(const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias,
                    double eps = 1e-5);
TensorPtr reshape(const TensorPtr& x, Shape new_shape);
// out row r = src row idx[r]; backward scatter-adds.
TensorPtr gather_rows(const TensorPtr& src, std::vector<std::size_t> idx);
// per-row dot product of two equal-shape rank-2 tensors -> length-R vector
TensorPtr row_dot(const TensorPtr& a, const TensorPtr& b);
// out[i,:] = sum_j weights[i,j] * values[i*N+j,:], weights N×N, values (N²)×d
TensorPtr pair_weighted_sum(const TensorPtr& weights, const TensorPtr& values);
// inverted-scale dropout; rate 0 returns x unchanged
TensorPtr dropout(const TensorPtr& x, double rate, Rng& rng);
// mean over rows of -log softmax(logits[r])[targets[r]]
TensorPtr cross_entropy_rows(const TensorPtr& logits, const std::vector<std::uint32_t>& targets);

// Plain argmax per row, lowest index wins ties. Not differentiable.
std::vector<std::uint32_t> argmax_rows(const Tensor& logits);

}  // namespace rt
