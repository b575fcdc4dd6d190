#include "rt/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "rt/error.hpp"

namespace rt {

namespace {

std::atomic<std::uint64_t> g_seq{0};
std::atomic<std::size_t> g_live_bytes{0};
std::atomic<std::size_t> g_peak_bytes{0};

void account_alloc(std::size_t bytes) {
    const std::size_t live = g_live_bytes.fetch_add(bytes) + bytes;
    std::size_t peak = g_peak_bytes.load();
    while (live > peak && !g_peak_bytes.compare_exchange_weak(peak, live)) {
    }
}

void account_free(std::size_t bytes) { g_live_bytes.fetch_sub(bytes); }

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
    }
}

// rows × cols view of an arbitrary-rank tensor split at the last axis
std::pair<std::size_t, std::size_t> rows_cols(const Tensor& t) {
    if (t.shape.empty()) {
        return {1, 1};
    }
    const std::size_t cols = t.shape.back();
    const std::size_t rows = cols == 0 ? 0 : t.size() / cols;
    return {rows, cols};
}

}  // namespace

std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (const std::size_t e : s) {
        n *= e;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) {
            out += "x";
        }
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape s, std::vector<double> d, bool req_grad)
    : shape(std::move(s)), data(std::move(d)), requires_grad(req_grad) {
    if (data.size() != numel(shape)) {
        throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
    seq = g_seq.fetch_add(1) + 1;
    account_alloc(data.size() * sizeof(double));
}

Tensor::~Tensor() { account_free((data.size() + grad.size()) * sizeof(double)); }

double Tensor::scalar_value() const {
    if (!is_scalar()) {
        throw ShapeError("scalar_value: tensor has shape " + shape_str(shape));
    }
    return data[0];
}

void Tensor::ensure_grad() {
    if (grad.empty() && !data.empty()) {
        grad.assign(data.size(), 0.0);
        account_alloc(grad.size() * sizeof(double));
    }
}

void Tensor::zero_grad() {
    if (!grad.empty()) {
        std::fill(grad.begin(), grad.end(), 0.0);
    }
}

TensorPtr tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    return std::make_shared<Tensor>(std::move(shape), std::move(data), requires_grad);
}

TensorPtr zeros(Shape shape, bool requires_grad) {
    const std::size_t n = numel(shape);
    return tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

TensorPtr full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = numel(shape);
    return tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

TensorPtr scalar_tensor(double value, bool requires_grad) {
    return tensor({1}, {value}, requires_grad);
}

TensorPtr uniform_tensor(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
    std::vector<double> d(numel(shape));
    for (double& v : d) {
        v = rng.uniform(lo, hi);
    }
    return tensor(std::move(shape), std::move(d), requires_grad);
}

TensorPtr glorot_tensor(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return uniform_tensor({fan_in, fan_out}, rng, -a, a, true);
}

std::size_t live_tensor_bytes() { return g_live_bytes.load(); }
std::size_t peak_tensor_bytes() { return g_peak_bytes.load(); }
void reset_peak_tensor_bytes() { g_peak_bytes.store(g_live_bytes.load()); }

Tape Tape::trace(const TensorPtr& root) {
    Tape tape;
    std::unordered_set<const Tensor*> seen;
    std::vector<TensorPtr> stack{root};
    seen.insert(root.get());
    while (!stack.empty()) {
        TensorPtr t = std::move(stack.back());
        stack.pop_back();
        for (const TensorPtr& p : t->parents) {
            if (seen.insert(p.get()).second) {
                stack.push_back(p);
            }
        }
        tape.order.push_back(std::move(t));
    }
    std::sort(tape.order.begin(), tape.order.end(),
              [](const TensorPtr& a, const TensorPtr& b) { return a->seq < b->seq; });
    return tape;
}

void backward(const TensorPtr& root) {
    if (!root->is_scalar()) {
        throw ShapeError("backward: root must be scalar, got shape " + shape_str(root->shape));
    }
    Tape tape = Tape::trace(root);
    // Interior gradients are per-pass scratch; leaf gradients accumulate.
    for (const TensorPtr& t : tape.order) {
        if (!t->is_leaf()) {
            t->ensure_grad();
            t->zero_grad();
        }
    }
    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto it = tape.order.rbegin(); it != tape.order.rend(); ++it) {
        if ((*it)->backward_fn) {
            (*it)->backward_fn(**it);
        }
    }
}

namespace {

// Wires an op result into the graph. Parents and the closure are only kept
// when gradients can flow.
TensorPtr make_result(Shape shape, std::vector<double> data, std::vector<TensorPtr> parents,
                      std::function<void(Tensor&)> bwd) {
    bool req = false;
    for (const TensorPtr& p : parents) {
        req = req || p->requires_grad;
    }
    TensorPtr out = tensor(std::move(shape), std::move(data), req);
    if (req) {
        out->parents = std::move(parents);
        out->backward_fn = std::move(bwd);
    }
    return out;
}

}  // namespace

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape.size() != 2 || b->shape.size() != 2) {
        throw ShapeError("matmul: expects rank-2 operands, got " + shape_str(a->shape) + " and " +
                         shape_str(b->shape));
    }
    const std::size_t m = a->shape[0], k = a->shape[1], k2 = b->shape[0], n = b->shape[1];
    if (k != k2) {
        throw ShapeError("matmul: inner extents differ, " + shape_str(a->shape) + " vs " +
                         shape_str(b->shape));
    }
    std::vector<double> out(m * n, 0.0);
    const double* ad = a->data.data();
    const double* bd = b->data.data();
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.data() + i * n;
        const double* arow = ad + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = bd + kk * n;
            for (std::size_t j = 0; j < n; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
    return make_result(
        {m, n}, std::move(out), {a, b}, [a, b, m, k, n](Tensor& self) {
            const double* g = self.grad.data();
            if (a->requires_grad) {
                a->ensure_grad();
                double* ga = a->grad.data();
                const double* bd = b->data.data();
                for (std::size_t i = 0; i < m; ++i) {
                    const double* grow = g + i * n;
                    double* garow = ga + i * k;
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const double* brow = bd + kk * n;
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j) {
                            s += grow[j] * brow[j];
                        }
                        garow[kk] += s;
                    }
                }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                double* gb = b->grad.data();
                const double* ad = a->data.data();
                for (std::size_t kk = 0; kk < k; ++kk) {
                    double* gbrow = gb + kk * n;
                    for (std::size_t i = 0; i < m; ++i) {
                        const double av = ad[i * k + kk];
                        const double* grow = g + i * n;
                        for (std::size_t j = 0; j < n; ++j) {
                            gbrow[j] += av * grow[j];
                        }
                    }
                }
            }
        });
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape("add", *a, *b);
    std::vector<double> out(a->size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a->data[i] + b->data[i];
    }
    return make_result(a->shape, std::move(out), {a, b}, [a, b](Tensor& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                a->grad[i] += self.grad[i];
            }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                b->grad[i] += self.grad[i];
            }
        }
    });
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape("sub", *a, *b);
    std::vector<double> out(a->size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a->data[i] - b->data[i];
    }
    return make_result(a->shape, std::move(out), {a, b}, [a, b](Tensor& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                a->grad[i] += self.grad[i];
            }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                b->grad[i] -= self.grad[i];
            }
        }
    });
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape("mul", *a, *b);
    std::vector<double> out(a->size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a->data[i] * b->data[i];
    }
    return make_result(a->shape, std::move(out), {a, b}, [a, b](Tensor& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                a->grad[i] += self.grad[i] * b->data[i];
            }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                b->grad[i] += self.grad[i] * a->data[i];
            }
        }
    });
}

TensorPtr scale(const TensorPtr& a, double c) {
    std::vector<double> out(a->size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a->data[i] * c;
    }
    return make_result(a->shape, std::move(out), {a}, [a, c](Tensor& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                a->grad[i] += self.grad[i] * c;
            }
        }
    });
}

TensorPtr add_bias(const TensorPtr& m, const TensorPtr& bias) {
    if (bias->shape.size() != 1) {
        throw ShapeError("add_bias: bias must be rank-1, got " + shape_str(bias->shape));
    }
    const auto [rows, cols] = rows_cols(*m);
    if (cols != bias->shape[0]) {
        throw ShapeError("add_bias: last extent of " + shape_str(m->shape) +
                         " does not match bias " + shape_str(bias->shape));
    }
    std::vector<double> out(m->size());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out[r * cols + c] = m->data[r * cols + c] + bias->data[c];
        }
    }
    return make_result(m->shape, std::move(out), {m, bias}, [m, bias, rows, cols](Tensor& self) {
        if (m->requires_grad) {
            m->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                m->grad[i] += self.grad[i];
            }
        }
        if (bias->requires_grad) {
            bias->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < cols; ++c) {
                    bias->grad[c] += self.grad[r * cols + c];
                }
            }
        }
    });
}

TensorPtr relu(const TensorPtr& x) {
    std::vector<double> out(x->size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x->data[i] > 0.0 ? x->data[i] : 0.0;
    }
    return make_result(x->shape, std::move(out), {x}, [x](Tensor& self) {
        if (!x->requires_grad) {
            return;
        }
        x->ensure_grad();
        // subgradient at 0 is 0
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (x->data[i] > 0.0) {
                x->grad[i] += self.grad[i];
            }
        }
    });
}

TensorPtr concat_last_axis(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) {
        throw ShapeError("concat_last_axis: no inputs");
    }
    const Shape lead(parts[0]->shape.begin(), parts[0]->shape.end() - 1);
    std::size_t total_cols = 0;
    for (const TensorPtr& p : parts) {
        if (p->shape.empty()) {
            throw ShapeError("concat_last_axis: rank-0 input");
        }
        const Shape plead(p->shape.begin(), p->shape.end() - 1);
        if (plead != lead) {
            throw ShapeError("concat_last_axis: leading extents differ, " +
                             shape_str(parts[0]->shape) + " vs " + shape_str(p->shape));
        }
        total_cols += p->shape.back();
    }
    const std::size_t rows = numel(lead);
    std::vector<double> out(rows * total_cols);
    std::size_t col0 = 0;
    for (const TensorPtr& p : parts) {
        const std::size_t pc = p->shape.back();
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(p->data.data() + r * pc, pc, out.data() + r * total_cols + col0);
        }
        col0 += pc;
    }
    Shape oshape = lead;
    oshape.push_back(total_cols);
    return make_result(std::move(oshape), std::move(out), std::vector<TensorPtr>(parts),
                       [parts, rows, total_cols](Tensor& self) {
                           std::size_t col0 = 0;
                           for (const TensorPtr& p : parts) {
                               const std::size_t pc = p->shape.back();
                               if (p->requires_grad) {
                                   p->ensure_grad();
                                   for (std::size_t r = 0; r < rows; ++r) {
                                       for (std::size_t c = 0; c < pc; ++c) {
                                           p->grad[r * pc + c] +=
                                               self.grad[r * total_cols + col0 + c];
                                       }
                                   }
                               }
                               col0 += pc;
                           }
                       });
}

TensorPtr sum(const TensorPtr& x) {
    double s = 0.0;
    for (const double v : x->data) {
        s += v;
    }
    return make_result({1}, {s}, {x}, [x](Tensor& self) {
        if (x->requires_grad) {
            x->ensure_grad();
            for (double& g : x->grad) {
                g += self.grad[0];
            }
        }
    });
}

TensorPtr mean(const TensorPtr& x) {
    if (x->size() == 0) {
        throw ShapeError("mean: empty tensor " + shape_str(x->shape));
    }
    double s = 0.0;
    for (const double v : x->data) {
        s += v;
    }
    const double inv = 1.0 / static_cast<double>(x->size());
    return make_result({1}, {s * inv}, {x}, [x, inv](Tensor& self) {
        if (x->requires_grad) {
            x->ensure_grad();
            for (double& g : x->grad) {
                g += self.grad[0] * inv;
            }
        }
    });
}

TensorPtr max_over_axis(const TensorPtr& x, std::size_t axis) {
    const std::size_t rank = x->shape.size();
    std::size_t outer = 1, reduce = 0, inner = 1;
    Shape oshape;
    if (rank == 2 && axis == 0) {
        reduce = x->shape[0];
        inner = x->shape[1];
        oshape = {inner};
    } else if (rank == 2 && axis == 1) {
        outer = x->shape[0];
        reduce = x->shape[1];
        oshape = {outer};
    } else if (rank == 3 && axis == 1) {
        outer = x->shape[0];
        reduce = x->shape[1];
        inner = x->shape[2];
        oshape = {outer, inner};
    } else {
        throw ShapeError("max_over_axis: unsupported axis " + std::to_string(axis) +
                         " for shape " + shape_str(x->shape));
    }
    if (reduce == 0) {
        throw ShapeError("max_over_axis: empty reduction axis in " + shape_str(x->shape));
    }
    std::vector<double> out(outer * inner, -std::numeric_limits<double>::infinity());
    std::vector<std::size_t> arg(outer * inner, 0);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t r = 0; r < reduce; ++r) {
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t src = (o * reduce + r) * inner + in;
                const std::size_t dst = o * inner + in;
                // strict > keeps the first index on ties
                if (x->data[src] > out[dst]) {
                    out[dst] = x->data[src];
                    arg[dst] = src;
                }
            }
        }
    }
    return make_result(std::move(oshape), std::move(out), {x},
                       [x, arg = std::move(arg)](Tensor& self) {
                           if (!x->requires_grad) {
                               return;
                           }
                           x->ensure_grad();
                           for (std::size_t i = 0; i < arg.size(); ++i) {
                               x->grad[arg[i]] += self.grad[i];
                           }
                       });
}

TensorPtr softmax_rows(const TensorPtr& x, const TensorPtr& mask) {
    const auto [rows, cols] = rows_cols(*x);
    if (cols == 0) {
        throw ShapeError("softmax_rows: empty rows in " + shape_str(x->shape));
    }
    if (mask) {
        check_same_shape("softmax_rows(mask)", *x, *mask);
    }
    std::vector<double> out(x->size(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x->data.data() + r * cols;
        const double* mr = mask ? mask->data.data() + r * cols : nullptr;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cols; ++c) {
            if ((!mr || mr[c] != 0.0) && xr[c] > mx) {
                mx = xr[c];
            }
        }
        if (mx == -std::numeric_limits<double>::infinity()) {
            throw ValueError("softmax_rows: row " + std::to_string(r) + " is fully masked");
        }
        double denom = 0.0;
        double* orow = out.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            if (!mr || mr[c] != 0.0) {
                orow[c] = std::exp(xr[c] - mx);
                denom += orow[c];
            }
        }
        const double inv = 1.0 / denom;
        for (std::size_t c = 0; c < cols; ++c) {
            orow[c] *= inv;
        }
    }
    return make_result(x->shape, std::move(out), {x}, [x, rows, cols](Tensor& self) {
        if (!x->requires_grad) {
            return;
        }
        x->ensure_grad();
        // dx_c = y_c (g_c - sum_k g_k y_k); masked entries have y = 0
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = self.data.data() + r * cols;
            const double* g = self.grad.data() + r * cols;
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
                dot += g[c] * y[c];
            }
            double* gx = x->grad.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) {
                gx[c] += y[c] * (g[c] - dot);
            }
        }
    });
}

TensorPtr layernorm(const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias, double eps) {
    const auto [rows, cols] = rows_cols(*x);
    if (cols == 0) {
        throw ShapeError("layernorm: empty last axis in " + shape_str(x->shape));
    }
    if (gain->shape != Shape{cols} || bias->shape != Shape{cols}) {
        throw ShapeError("layernorm: gain " + shape_str(gain->shape) + " / bias " +
                         shape_str(bias->shape) + " must be [" + std::to_string(cols) + "]");
    }
    std::vector<double> out(x->size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x->data.data() + r * cols;
        double mu = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            mu += xr[c];
        }
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double d = xr[c] - mu;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        const double inv = 1.0 / std::sqrt(var + eps);
        double* orow = out.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            orow[c] = (xr[c] - mu) * inv * gain->data[c] + bias->data[c];
        }
    }
    return make_result(
        x->shape, std::move(out), {x, gain, bias}, [x, gain, bias, rows, cols, eps](Tensor& self) {
            const double dn = static_cast<double>(cols);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* xr = x->data.data() + r * cols;
                const double* g = self.grad.data() + r * cols;
                double mu = 0.0;
                for (std::size_t c = 0; c < cols; ++c) {
                    mu += xr[c];
                }
                mu /= dn;
                double var = 0.0;
                for (std::size_t c = 0; c < cols; ++c) {
                    const double d = xr[c] - mu;
                    var += d * d;
                }
                var /= dn;
                const double inv = 1.0 / std::sqrt(var + eps);
                if (gain->requires_grad || bias->requires_grad) {
                    gain->ensure_grad();
                    bias->ensure_grad();
                    for (std::size_t c = 0; c < cols; ++c) {
                        const double xhat = (xr[c] - mu) * inv;
                        if (gain->requires_grad) {
                            gain->grad[c] += g[c] * xhat;
                        }
                        if (bias->requires_grad) {
                            bias->grad[c] += g[c];
                        }
                    }
                }
                if (x->requires_grad) {
                    x->ensure_grad();
                    double mean_dg = 0.0, mean_dgx = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) {
                        const double dg = g[c] * gain->data[c];
                        const double xhat = (xr[c] - mu) * inv;
                        mean_dg += dg;
                        mean_dgx += dg * xhat;
                    }
                    mean_dg /= dn;
                    mean_dgx /= dn;
                    double* gx = x->grad.data() + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) {
                        const double dg = g[c] * gain->data[c];
                        const double xhat = (xr[c] - mu) * inv;
                        gx[c] += inv * (dg - mean_dg - xhat * mean_dgx);
                    }
                }
            }
        });
}

TensorPtr reshape(const TensorPtr& x, Shape new_shape) {
    if (numel(new_shape) != x->size()) {
        throw ShapeError("reshape: cannot view " + shape_str(x->shape) + " as " +
                         shape_str(new_shape));
    }
    return make_result(std::move(new_shape), x->data, {x}, [x](Tensor& self) {
        if (x->requires_grad) {
            x->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                x->grad[i] += self.grad[i];
            }
        }
    });
}

TensorPtr gather_rows(const TensorPtr& src, std::vector<std::size_t> idx) {
    if (src->shape.size() != 2) {
        throw ShapeError("gather_rows: source must be rank-2, got " + shape_str(src->shape));
    }
    const std::size_t rows = src->shape[0], cols = src->shape[1];
    const std::size_t out_rows = idx.size();
    std::vector<double> out(out_rows * cols);
    for (std::size_t r = 0; r < out_rows; ++r) {
        if (idx[r] >= rows) {
            throw ShapeError("gather_rows: index " + std::to_string(idx[r]) + " out of " +
                             std::to_string(rows));
        }
        std::copy_n(src->data.data() + idx[r] * cols, cols, out.data() + r * cols);
    }
    return make_result({out_rows, cols}, std::move(out), {src},
                       [src, idx = std::move(idx), cols](Tensor& self) {
                           if (!src->requires_grad) {
                               return;
                           }
                           src->ensure_grad();
                           for (std::size_t r = 0; r < idx.size(); ++r) {
                               double* dst = src->grad.data() + idx[r] * cols;
                               const double* g = self.grad.data() + r * cols;
                               for (std::size_t c = 0; c < cols; ++c) {
                                   dst[c] += g[c];
                               }
                           }
                       });
}

TensorPtr row_dot(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape("row_dot", *a, *b);
    if (a->shape.size() != 2) {
        throw ShapeError("row_dot: expects rank-2, got " + shape_str(a->shape));
    }
    const std::size_t rows = a->shape[0], cols = a->shape[1];
    std::vector<double> out(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* ar = a->data.data() + r * cols;
        const double* br = b->data.data() + r * cols;
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            s += ar[c] * br[c];
        }
        out[r] = s;
    }
    return make_result({rows}, std::move(out), {a, b}, [a, b, rows, cols](Tensor& self) {
        for (std::size_t r = 0; r < rows; ++r) {
            const double g = self.grad[r];
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t c = 0; c < cols; ++c) {
                    a->grad[r * cols + c] += g * b->data[r * cols + c];
                }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t c = 0; c < cols; ++c) {
                    b->grad[r * cols + c] += g * a->data[r * cols + c];
                }
            }
        }
    });
}

TensorPtr pair_weighted_sum(const TensorPtr& weights, const TensorPtr& values) {
    if (weights->shape.size() != 2 || weights->shape[0] != weights->shape[1]) {
        throw ShapeError("pair_weighted_sum: weights must be N×N, got " +
                         shape_str(weights->shape));
    }
    const std::size_t n = weights->shape[0];
    if (values->shape.size() != 2 || values->shape[0] != n * n) {
        throw ShapeError("pair_weighted_sum: values must be [N²×d], got " +
                         shape_str(values->shape) + " for N=" + std::to_string(n));
    }
    const std::size_t d = values->shape[1];
    std::vector<double> out(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* orow = out.data() + i * d;
        for (std::size_t j = 0; j < n; ++j) {
            const double w = weights->data[i * n + j];
            const double* vrow = values->data.data() + (i * n + j) * d;
            for (std::size_t c = 0; c < d; ++c) {
                orow[c] += w * vrow[c];
            }
        }
    }
    return make_result({n, d}, std::move(out), {weights, values},
                       [weights, values, n, d](Tensor& self) {
                           for (std::size_t i = 0; i < n; ++i) {
                               const double* g = self.grad.data() + i * d;
                               for (std::size_t j = 0; j < n; ++j) {
                                   const std::size_t pair = i * n + j;
                                   const double w = weights->data[pair];
                                   if (weights->requires_grad) {
                                       weights->ensure_grad();
                                       double s = 0.0;
                                       const double* vrow = values->data.data() + pair * d;
                                       for (std::size_t c = 0; c < d; ++c) {
                                           s += g[c] * vrow[c];
                                       }
                                       weights->grad[pair] += s;
                                   }
                                   if (values->requires_grad) {
                                       values->ensure_grad();
                                       double* gv = values->grad.data() + pair * d;
                                       for (std::size_t c = 0; c < d; ++c) {
                                           gv[c] += w * g[c];
                                       }
                                   }
                               }
                           }
                       });
}

TensorPtr dropout(const TensorPtr& x, double rate, Rng& rng) {
    if (rate <= 0.0) {
        return x;
    }
    if (rate >= 1.0) {
        throw ValueError("dropout: rate must be in [0,1), got " + std::to_string(rate));
    }
    const double keep = 1.0 - rate;
    const double inv_keep = 1.0 / keep;
    std::vector<double> mask(x->size());
    std::vector<double> out(x->size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        mask[i] = rng.uniform() < keep ? inv_keep : 0.0;
        out[i] = x->data[i] * mask[i];
    }
    return make_result(x->shape, std::move(out), {x}, [x, mask = std::move(mask)](Tensor& self) {
        if (!x->requires_grad) {
            return;
        }
        x->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            x->grad[i] += self.grad[i] * mask[i];
        }
    });
}

TensorPtr cross_entropy_rows(const TensorPtr& logits, const std::vector<std::uint32_t>& targets) {
    if (logits->shape.size() != 2) {
        throw ShapeError("cross_entropy_rows: logits must be rank-2, got " +
                         shape_str(logits->shape));
    }
    const std::size_t rows = logits->shape[0], cols = logits->shape[1];
    if (targets.size() != rows) {
        throw ShapeError("cross_entropy_rows: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(rows) + " rows");
    }
    std::vector<double> probs(rows * cols);
    double loss = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (targets[r] >= cols) {
            throw ValueError("cross_entropy_rows: target " + std::to_string(targets[r]) +
                             " out of " + std::to_string(cols));
        }
        const double* lr = logits->data.data() + r * cols;
        double mx = lr[0];
        for (std::size_t c = 1; c < cols; ++c) {
            mx = std::max(mx, lr[c]);
        }
        double denom = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            probs[r * cols + c] = std::exp(lr[c] - mx);
            denom += probs[r * cols + c];
        }
        const double inv = 1.0 / denom;
        for (std::size_t c = 0; c < cols; ++c) {
            probs[r * cols + c] *= inv;
        }
        loss += std::log(denom) + mx - lr[targets[r]];
    }
    loss /= static_cast<double>(rows);
    return make_result({1}, {loss}, {logits},
                       [logits, targets, probs = std::move(probs), rows, cols](Tensor& self) {
                           if (!logits->requires_grad) {
                               return;
                           }
                           logits->ensure_grad();
                           const double g = self.grad[0] / static_cast<double>(rows);
                           for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t c = 0; c < cols; ++c) {
                                   const double onehot = c == targets[r] ? 1.0 : 0.0;
                                   logits->grad[r * cols + c] +=
                                       g * (probs[r * cols + c] - onehot);
                               }
                           }
                       });
}

std::vector<std::uint32_t> argmax_rows(const Tensor& logits) {
    if (logits.shape.size() != 2) {
        throw ShapeError("argmax_rows: expects rank-2, got " + shape_str(logits.shape));
    }
    const std::size_t rows = logits.shape[0], cols = logits.shape[1];
    if (cols == 0) {
        throw ShapeError("argmax_rows: empty rows");
    }
    std::vector<std::uint32_t> out(rows, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* lr = logits.data.data() + r * cols;
        std::size_t best = 0;
        for (std::size_t c = 1; c < cols; ++c) {
            if (lr[c] > lr[best]) {
                best = c;
            }
        }
        out[r] = static_cast<std::uint32_t>(best);
    }
    return out;
}

}  // namespace rt
