#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace rnadesign {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of 64-bit floats with optional participation in
// reverse-mode autodiff. Copying a Tensor copies the handle, not the buffer;
// ops never mutate their inputs.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    static Tensor from_data(Shape shape, std::vector<double> data);
    static Tensor scalar(double v);
    static Tensor randn(Shape shape, class RngStream& rng, double stddev = 1.0);
    static Tensor rand_uniform(Shape shape, class RngStream& rng, double lo, double hi);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int rank() const;
    std::int64_t numel() const;
    std::int64_t dim(int i) const;  // negative i counts from the back

    std::vector<double>& data();
    const std::vector<double>& data() const;
    double value() const;  // requires numel() == 1
    double& at(std::initializer_list<std::int64_t> idx);
    double at(std::initializer_list<std::int64_t> idx) const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool v = true);
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    void zero_grad();

    // Detached deep copy (no grad, not on any tape).
    Tensor clone() const;

    bool same_impl(const Tensor& other) const { return impl_ == other.impl_; }

private:
    struct Impl {
        Shape shape;
        std::vector<double> data;
        std::vector<double> grad;  // sized like data iff requires_grad
        bool requires_grad = false;
    };
    std::shared_ptr<Impl> impl_;
    Impl& ref();
    const Impl& ref() const;
};

// Ordered record of executed ops. backward() replays the record once in
// reverse order, which is a valid topological order by construction.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(const char* name, std::function<void()> backward_fn);
    std::size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and replays every recorded op exactly once.
    // Returns the number of ops replayed. loss must be scalar and recorded
    // on this tape.
    std::size_t backward(const Tensor& loss);

    void clear() { nodes_.clear(); }

private:
    struct Node {
        const char* name;
        std::function<void()> backward_fn;
    };
    std::vector<Node> nodes_;
};

// Thread-local active tape. Ops record themselves while a TapeScope is live
// and at least one input requires grad; with no active tape they run in
// inference mode and produce detached outputs.
Tape* active_tape();

class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

// ---- ops ------------------------------------------------------------------
// Binary ops accept equal shapes, or b whose shape is a trailing suffix of
// a's (bias-style broadcast). No other broadcasting.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// a: [..., p] x b: [p, q] -> [..., q]; leading axes of a are batch rows.
Tensor matmul(const Tensor& a, const Tensor& b);

// Swap the last two axes.
Tensor transpose_last2(const Tensor& a);

// Concatenate along `axis` (negative counts from the back).
Tensor concat(const std::vector<Tensor>& parts, int axis);

// out[e, ...] = a[idx[e], ...]
Tensor gather_rows(const Tensor& a, const std::vector<std::int64_t>& idx);
// out[idx[e], ...] += a[e, ...]; out has n rows. Empty rows stay zero.
Tensor scatter_sum_rows(const Tensor& a, const std::vector<std::int64_t>& idx, std::int64_t n);

enum class Reduce { Sum, Mean };
// Removes `axis` (negative counts from the back).
Tensor reduce(Reduce op, const Tensor& a, int axis);
Tensor sum_all(const Tensor& a);  // -> scalar

// Euclidean norm over a trailing axis of extent 3, with 1e-8 added under the
// square root so the gradient stays finite at the origin.
Tensor safe_norm(const Tensor& v);
inline constexpr double kSafeNormEps = 1e-8;

// out[..., c] = g[...] for c in 0..2; adjoint sums over the new axis.
Tensor expand_last3(const Tensor& g);

// Parameter-free RMS normalization of vector channels: each [..., C, 3] row
// is scaled by 1/sqrt(mean_c ||v_c||^2 + eps). Rotation-equivariant since the
// scale is an invariant of the row.
Tensor vector_rms_norm(const Tensor& v, double eps = 1e-8);

// Layer normalization over the last axis with learned gain/shift.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Mean over rows of -sum_j q_ij log softmax(logits)_ij with
// q = (1 - smoothing) * onehot(target) + smoothing / 4. logits: [n, 4].
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                             double smoothing);

// matmul(x, w) + b   (b may be empty for no bias)
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

}  // namespace rnadesign
