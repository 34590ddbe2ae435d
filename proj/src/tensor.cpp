#include "rnadesign/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "rnadesign/rng.hpp"

#ifdef RNADESIGN_WITH_BLAS
#include <cblas.h>
#endif

namespace rnadesign {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor(Shape shape, double fill) {
    for (auto d : shape) {
        if (d < 0) throw std::invalid_argument("tensor extent must be non-negative");
    }
    impl_ = std::make_shared<Impl>();
    impl_->shape = std::move(shape);
    impl_->data.assign(static_cast<std::size_t>(shape_numel(impl_->shape)), fill);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
        throw std::invalid_argument("from_data: shape " + shape_str(shape) + " does not match " +
                                    std::to_string(data.size()) + " values");
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(data);
    return t;
}

Tensor Tensor::scalar(double v) { return from_data({}, {v}); }

Tensor Tensor::randn(Shape shape, RngStream& rng, double stddev) {
    Tensor t(std::move(shape));
    for (auto& x : t.data()) x = stddev * rng.normal();
    return t;
}

Tensor Tensor::rand_uniform(Shape shape, RngStream& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (auto& x : t.data()) x = rng.uniform(lo, hi);
    return t;
}

Tensor::Impl& Tensor::ref() {
    if (!impl_) throw std::runtime_error("use of undefined tensor");
    return *impl_;
}
const Tensor::Impl& Tensor::ref() const {
    if (!impl_) throw std::runtime_error("use of undefined tensor");
    return *impl_;
}

const Shape& Tensor::shape() const { return ref().shape; }
int Tensor::rank() const { return static_cast<int>(ref().shape.size()); }
std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(ref().data.size()); }

std::int64_t Tensor::dim(int i) const {
    const auto& s = ref().shape;
    const int r = static_cast<int>(s.size());
    if (i < 0) i += r;
    if (i < 0 || i >= r) throw std::invalid_argument("dim: axis out of range");
    return s[static_cast<std::size_t>(i)];
}

std::vector<double>& Tensor::data() { return ref().data; }
const std::vector<double>& Tensor::data() const { return ref().data; }

double Tensor::value() const {
    if (numel() != 1) throw std::invalid_argument("value: tensor is not scalar");
    return ref().data[0];
}

double& Tensor::at(std::initializer_list<std::int64_t> idx) {
    const auto& s = ref().shape;
    if (idx.size() != s.size()) throw std::invalid_argument("at: wrong index rank");
    std::int64_t off = 0;
    std::size_t k = 0;
    for (auto i : idx) {
        if (i < 0 || i >= s[k]) throw std::invalid_argument("at: index out of range");
        off = off * s[k] + i;
        ++k;
    }
    return ref().data[static_cast<std::size_t>(off)];
}

double Tensor::at(std::initializer_list<std::int64_t> idx) const {
    return const_cast<Tensor*>(this)->at(idx);
}

bool Tensor::requires_grad() const { return ref().requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
    auto& im = ref();
    im.requires_grad = v;
    if (v && im.grad.size() != im.data.size()) im.grad.assign(im.data.size(), 0.0);
    if (!v) im.grad.clear();
    return *this;
}

std::vector<double>& Tensor::grad() {
    auto& im = ref();
    if (!im.requires_grad) throw std::runtime_error("grad: tensor does not require grad");
    return im.grad;
}

const std::vector<double>& Tensor::grad() const {
    return const_cast<Tensor*>(this)->grad();
}

void Tensor::zero_grad() {
    auto& im = ref();
    if (im.requires_grad) std::fill(im.grad.begin(), im.grad.end(), 0.0);
}

Tensor Tensor::clone() const {
    return from_data(ref().shape, ref().data);
}

// ---- Tape -------------------------------------------------------------------

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = prev_; }

void Tape::record(const char* name, std::function<void()> backward_fn) {
    nodes_.push_back({name, std::move(backward_fn)});
}

std::size_t Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    if (!loss.requires_grad())
        throw std::invalid_argument("backward: loss is not recorded on a tape");
    loss.grad();  // validates allocation
    const_cast<Tensor&>(loss).grad()[0] += 1.0;
    std::size_t visited = 0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        it->backward_fn();
        ++visited;
    }
    return visited;
}

// ---- op helpers -------------------------------------------------------------

namespace {

bool tracing(std::initializer_list<const Tensor*> ins) {
    if (!g_active_tape) return false;
    for (const Tensor* t : ins)
        if (t->requires_grad()) return true;
    return false;
}

Tensor make_output(Shape shape, bool trace) {
    Tensor out(std::move(shape));
    if (trace) out.set_requires_grad(true);
    return out;
}

// b broadcasts over a iff b.shape is a trailing suffix of a.shape.
void check_broadcast(const Tensor& a, const Tensor& b, const char* op) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sb.size() > sa.size())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(sa) +
                                    " vs " + shape_str(sb));
    for (std::size_t i = 0; i < sb.size(); ++i) {
        if (sb[sb.size() - 1 - i] != sa[sa.size() - 1 - i])
            throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(sa) +
                                        " vs " + shape_str(sb));
    }
}

int normalize_axis(int axis, int rank, const char* op) {
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank)
        throw std::invalid_argument(std::string(op) + ": axis out of range");
    return axis;
}

void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
          const double* a, const double* b, double beta, double* c) {
#ifdef RNADESIGN_WITH_BLAS
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), 1.0, a, trans_a ? m : k, b, trans_b ? k : n, beta, c,
                n);
#else
    // Cache-friendly i-k-j kernel; C = beta*C + op(A)op(B).
    if (beta == 0.0) std::fill(c, c + m * n, 0.0);
    for (std::int64_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::int64_t kk = 0; kk < k; ++kk) {
            const double aik = trans_a ? a[kk * m + i] : a[i * k + kk];
            if (aik == 0.0) continue;
            const double* brow = trans_b ? nullptr : b + kk * n;
            if (trans_b) {
                for (std::int64_t j = 0; j < n; ++j) crow[j] += aik * b[j * k + kk];
            } else {
                for (std::int64_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
            }
        }
    }
#endif
}

}  // namespace

// ---- elementwise ------------------------------------------------------------

namespace {

enum class BinOp { Add, Sub, Mul };

Tensor binary_op(BinOp op, const Tensor& a, const Tensor& b, const char* name) {
    check_broadcast(a, b, name);
    const std::int64_t inner = b.numel();
    const std::int64_t total = a.numel();
    const bool trace = tracing({&a, &b});
    Tensor out = make_output(a.shape(), trace);
    const auto& da = a.data();
    const auto& db = b.data();
    auto& dout = out.data();
    for (std::int64_t i = 0; i < total; ++i) {
        const double bv = db[static_cast<std::size_t>(inner ? i % inner : 0)];
        switch (op) {
            case BinOp::Add: dout[i] = da[i] + bv; break;
            case BinOp::Sub: dout[i] = da[i] - bv; break;
            case BinOp::Mul: dout[i] = da[i] * bv; break;
        }
    }
    if (trace) {
        Tensor ac = a, bc = b, oc = out;
        g_active_tape->record(name, [op, ac, bc, oc, inner, total]() mutable {
            const auto& g = oc.grad();
            if (ac.requires_grad()) {
                auto& ga = ac.grad();
                for (std::int64_t i = 0; i < total; ++i) {
                    switch (op) {
                        case BinOp::Add:
                        case BinOp::Sub: ga[i] += g[i]; break;
                        case BinOp::Mul:
                            ga[i] += g[i] * bc.data()[static_cast<std::size_t>(i % inner)];
                            break;
                    }
                }
            }
            if (bc.requires_grad()) {
                auto& gb = bc.grad();
                for (std::int64_t i = 0; i < total; ++i) {
                    const std::size_t j = static_cast<std::size_t>(i % inner);
                    switch (op) {
                        case BinOp::Add: gb[j] += g[i]; break;
                        case BinOp::Sub: gb[j] -= g[i]; break;
                        case BinOp::Mul: gb[j] += g[i] * ac.data()[i]; break;
                    }
                }
            }
        });
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Add, a, b, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Sub, a, b, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Mul, a, b, "mul"); }

Tensor scale(const Tensor& a, double c) {
    const bool trace = tracing({&a});
    Tensor out = make_output(a.shape(), trace);
    const auto& da = a.data();
    auto& dout = out.data();
    for (std::size_t i = 0; i < da.size(); ++i) dout[i] = c * da[i];
    if (trace) {
        Tensor ac = a, oc = out;
        g_active_tape->record("scale", [ac, oc, c]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const auto& g = oc.grad();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * g[i];
        });
    }
    return out;
}

Tensor relu(const Tensor& a) {
    const bool trace = tracing({&a});
    Tensor out = make_output(a.shape(), trace);
    const auto& da = a.data();
    auto& dout = out.data();
    for (std::size_t i = 0; i < da.size(); ++i) dout[i] = da[i] > 0.0 ? da[i] : 0.0;
    if (trace) {
        Tensor ac = a, oc = out;
        g_active_tape->record("relu", [ac, oc]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const auto& g = oc.grad();
            const auto& x = ac.data();
            for (std::size_t i = 0; i < ga.size(); ++i)
                if (x[i] > 0.0) ga[i] += g[i];
        });
    }
    return out;
}

Tensor sigmoid(const Tensor& a) {
    const bool trace = tracing({&a});
    Tensor out = make_output(a.shape(), trace);
    const auto& da = a.data();
    auto& dout = out.data();
    for (std::size_t i = 0; i < da.size(); ++i) dout[i] = 1.0 / (1.0 + std::exp(-da[i]));
    if (trace) {
        Tensor ac = a, oc = out;
        g_active_tape->record("sigmoid", [ac, oc]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const auto& g = oc.grad();
            const auto& y = oc.data();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
        });
    }
    return out;
}

// ---- matmul -----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() < 1 || b.rank() != 2)
        throw std::invalid_argument("matmul: need a [..., p] and b [p, q]");
    const std::int64_t p = a.dim(-1);
    if (p != b.dim(0))
        throw std::invalid_argument("matmul: inner extents differ, " + shape_str(a.shape()) +
                                    " x " + shape_str(b.shape()));
    const std::int64_t q = b.dim(1);
    const std::int64_t m = a.numel() / p;
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(q);
    const bool trace = tracing({&a, &b});
    Tensor out = make_output(std::move(out_shape), trace);
    gemm(false, false, m, q, p, a.data().data(), b.data().data(), 0.0, out.data().data());
    if (trace) {
        Tensor ac = a, bc = b, oc = out;
        g_active_tape->record("matmul", [ac, bc, oc, m, p, q]() mutable {
            const double* g = oc.grad().data();
            if (ac.requires_grad())  // dA = dC . B^T
                gemm(false, true, m, p, q, g, bc.data().data(), 1.0, ac.grad().data());
            if (bc.requires_grad())  // dB = A^T . dC
                gemm(true, false, p, q, m, ac.data().data(), g, 1.0, bc.grad().data());
        });
    }
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor y = matmul(x, w);
    if (b.defined()) y = add(y, b);
    return y;
}

// ---- shape ops ----------------------------------------------------------------

Tensor transpose_last2(const Tensor& a) {
    if (a.rank() < 2) throw std::invalid_argument("transpose_last2: rank must be >= 2");
    const std::int64_t r = a.dim(-2), c = a.dim(-1);
    const std::int64_t outer = a.numel() / (r * c);
    Shape out_shape = a.shape();
    std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
    const bool trace = tracing({&a});
    Tensor out = make_output(std::move(out_shape), trace);
    const auto& da = a.data();
    auto& dout = out.data();
    for (std::int64_t o = 0; o < outer; ++o) {
        const double* src = da.data() + o * r * c;
        double* dst = dout.data() + o * r * c;
        for (std::int64_t i = 0; i < r; ++i)
            for (std::int64_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
    }
    if (trace) {
        Tensor ac = a, oc = out;
        g_active_tape->record("transpose_last2", [ac, oc, outer, r, c]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const auto& g = oc.grad();
            for (std::int64_t o = 0; o < outer; ++o) {
                const double* src = g.data() + o * r * c;
                double* dst = ga.data() + o * r * c;
                for (std::int64_t i = 0; i < r; ++i)
                    for (std::int64_t j = 0; j < c; ++j) dst[i * c + j] += src[j * r + i];
            }
        });
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const int rank = parts[0].rank();
    const int ax = normalize_axis(axis, rank, "concat");
    Shape out_shape = parts[0].shape();
    std::int64_t cat_extent = 0;
    for (const auto& t : parts) {
        if (t.rank() != rank) throw std::invalid_argument("concat: rank mismatch");
        for (int i = 0; i < rank; ++i) {
            if (i != ax && t.dim(i) != out_shape[static_cast<std::size_t>(i)])
                throw std::invalid_argument("concat: extent mismatch off the concat axis");
        }
        cat_extent += t.dim(ax);
    }
    out_shape[static_cast<std::size_t>(ax)] = cat_extent;
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < ax; ++i) outer *= out_shape[static_cast<std::size_t>(i)];
    for (int i = ax + 1; i < rank; ++i) inner *= out_shape[static_cast<std::size_t>(i)];

    bool trace = false;
    for (const auto& t : parts)
        if (tracing({&t})) trace = true;
    Tensor out = make_output(out_shape, trace);
    auto& dout = out.data();
    std::int64_t offset = 0;
    for (const auto& t : parts) {
        const std::int64_t ext = t.dim(ax);
        const auto& dt = t.data();
        for (std::int64_t o = 0; o < outer; ++o)
            std::copy(dt.begin() + o * ext * inner, dt.begin() + (o + 1) * ext * inner,
                      dout.begin() + (o * cat_extent + offset) * inner);
        offset += ext;
    }
    if (trace) {
        std::vector<Tensor> pc = parts;
        Tensor oc = out;
        g_active_tape->record("concat", [pc, oc, outer, inner, cat_extent, ax]() mutable {
            const auto& g = oc.grad();
            std::int64_t offset = 0;
            for (auto& t : pc) {
                const std::int64_t ext = t.dim(ax);
                if (t.requires_grad()) {
                    auto& gt = t.grad();
                    for (std::int64_t o = 0; o < outer; ++o) {
                        const double* src = g.data() + (o * cat_extent + offset) * inner;
                        double* dst = gt.data() + o * ext * inner;
                        for (std::int64_t i = 0; i < ext * inner; ++i) dst[i] += src[i];
                    }
                }
                offset += ext;
            }
        });
    }
    return out;
}

// ---- gather / scatter ---------------------------------------------------------

Tensor gather_rows(const Tensor& a, const std::vector<std::int64_t>& idx) {
    if (a.rank() < 1) throw std::invalid_argument("gather_rows: rank must be >= 1");
    const std::int64_t n = a.dim(0);
    const std::int64_t row = a.numel() / std::max<std::int64_t>(n, 1);
    for (auto i : idx)
        if (i < 0 || i >= n) throw std::invalid_argument("gather_rows: index out of range");
    Shape out_shape = a.shape();
    out_shape[0] = static_cast<std::int64_t>(idx.size());
    const bool trace = tracing({&a});
    Tensor out = make_output(std::move(out_shape), trace);
    const auto& da = a.data();
    auto& dout = out.data();
    for (std::size_t e = 0; e < idx.size(); ++e)
        std::copy(da.begin() + idx[e] * row, da.begin() + (idx[e] + 1) * row,
                  dout.begin() + static_cast<std::int64_t>(e) * row);
    if (trace) {
        Tensor ac = a, oc = out;
        g_active_tape->record("gather_rows", [ac, oc, idx, row]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const auto& g = oc.grad();
            for (std::size_t e = 0; e < idx.size(); ++e) {
                const double* src = g.data() + static_cast<std::int64_t>(e) * row;
                double* dst = ga.data() + idx[e] * row;
                for (std::int64_t i = 0; i < row; ++i) dst[i] += src[i];
            }
        });
    }
    return out;
}

Tensor scatter_sum_rows(const Tensor& a, const std::vector<std::int64_t>& idx, std::int64_t n) {
    if (a.rank() < 1) throw std::invalid_argument("scatter_sum_rows: rank must be >= 1");
    if (a.dim(0) != static_cast<std::int64_t>(idx.size()))
        throw std::invalid_argument("scatter_sum_rows: rows and indices differ");
    const std::int64_t row = a.numel() / std::max<std::int64_t>(a.dim(0), 1);
    for (auto i : idx)
        if (i < 0 || i >= n) throw std::invalid_argument("scatter_sum_rows: index out of range");
    Shape out_shape = a.shape();
    out_shape[0] = n;
    const bool trace = tracing({&a});
    Tensor out = make_output(std::move(out_shape), trace);
    const auto& da = a.data();
    auto& dout = out.data();
    for (std::size_t e = 0; e < idx.size(); ++e) {
        const double* src = da.data() + static_cast<std::int64_t>(e) * row;
        double* dst = dout.data() + idx[e] * row;
        for (std::int64_t i = 0; i < row; ++i) dst[i] += src[i];
    }
    if (trace) {
        Tensor ac = a, oc = out;
        g_active_tape->record("scatter_sum_rows", [ac, oc, idx, row]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const auto& g = oc.grad();
            for (std::size_t e = 0; e < idx.size(); ++e) {
                const double* src = g.data() + idx[e] * row;
                double* dst = ga.data() + static_cast<std::int64_t>(e) * row;
                for (std::int64_t i = 0; i < row; ++i) dst[i] += src[i];
            }
        });
    }
    return out;
}

// ---- reductions ----------------------------------------------------------------

Tensor reduce(Reduce op, const Tensor& a, int axis) {
    const int ax = normalize_axis(axis, a.rank(), "reduce");
    const std::int64_t ext = a.dim(ax);
    if (ext == 0) throw std::invalid_argument("reduce: cannot reduce an empty axis");
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < ax; ++i) outer *= a.dim(i);
    for (int i = ax + 1; i < a.rank(); ++i) inner *= a.dim(i);
    Shape out_shape;
    for (int i = 0; i < a.rank(); ++i)
        if (i != ax) out_shape.push_back(a.dim(i));
    const bool trace = tracing({&a});
    Tensor out = make_output(std::move(out_shape), trace);
    const double w = op == Reduce::Mean ? 1.0 / static_cast<double>(ext) : 1.0;
    const auto& da = a.data();
    auto& dout = out.data();
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t k = 0; k < ext; ++k) {
            const double* src = da.data() + (o * ext + k) * inner;
            double* dst = dout.data() + o * inner;
            for (std::int64_t i = 0; i < inner; ++i) dst[i] += w * src[i];
        }
    if (trace) {
        Tensor ac = a, oc = out;
        g_active_tape->record("reduce", [ac, oc, outer, ext, inner, w]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const auto& g = oc.grad();
            for (std::int64_t o = 0; o < outer; ++o)
                for (std::int64_t k = 0; k < ext; ++k) {
                    double* dst = ga.data() + (o * ext + k) * inner;
                    const double* src = g.data() + o * inner;
                    for (std::int64_t i = 0; i < inner; ++i) dst[i] += w * src[i];
                }
        });
    }
    return out;
}

Tensor sum_all(const Tensor& a) {
    const bool trace = tracing({&a});
    Tensor out = make_output({}, trace);
    double s = 0.0;
    for (double x : a.data()) s += x;
    out.data()[0] = s;
    if (trace) {
        Tensor ac = a, oc = out;
        g_active_tape->record("sum_all", [ac, oc]() mutable {
            if (!ac.requires_grad()) return;
            const double g = oc.grad()[0];
            for (auto& x : ac.grad()) x += g;
        });
    }
    return out;
}

// ---- geometry-flavored ops -------------------------------------------------------

Tensor safe_norm(const Tensor& v) {
    if (v.rank() < 1 || v.dim(-1) != 3)
        throw std::invalid_argument("safe_norm: last extent must be 3");
    Shape out_shape(v.shape().begin(), v.shape().end() - 1);
    const std::int64_t rows = v.numel() / 3;
    const bool trace = tracing({&v});
    Tensor out = make_output(std::move(out_shape), trace);
    const auto& dv = v.data();
    auto& dout = out.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* p = dv.data() + 3 * r;
        dout[r] = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + kSafeNormEps);
    }
    if (trace) {
        Tensor vc = v, oc = out;
        g_active_tape->record("safe_norm", [vc, oc, rows]() mutable {
            if (!vc.requires_grad()) return;
            auto& gv = vc.grad();
            const auto& g = oc.grad();
            const auto& x = vc.data();
            const auto& y = oc.data();
            for (std::int64_t r = 0; r < rows; ++r)
                for (int c = 0; c < 3; ++c) gv[3 * r + c] += g[r] * x[3 * r + c] / y[r];
        });
    }
    return out;
}

Tensor expand_last3(const Tensor& g) {
    Shape out_shape = g.shape();
    out_shape.push_back(3);
    const std::int64_t rows = g.numel();
    const bool trace = tracing({&g});
    Tensor out = make_output(std::move(out_shape), trace);
    const auto& dg = g.data();
    auto& dout = out.data();
    for (std::int64_t r = 0; r < rows; ++r)
        for (int c = 0; c < 3; ++c) dout[3 * r + c] = dg[r];
    if (trace) {
        Tensor gc = g, oc = out;
        g_active_tape->record("expand_last3", [gc, oc, rows]() mutable {
            if (!gc.requires_grad()) return;
            auto& gg = gc.grad();
            const auto& go = oc.grad();
            for (std::int64_t r = 0; r < rows; ++r)
                for (int c = 0; c < 3; ++c) gg[r] += go[3 * r + c];
        });
    }
    return out;
}

Tensor vector_rms_norm(const Tensor& v, double eps) {
    if (v.rank() < 2 || v.dim(-1) != 3)
        throw std::invalid_argument("vector_rms_norm: need [..., C, 3]");
    const std::int64_t c = v.dim(-2);
    const std::int64_t rows = v.numel() / (3 * c);
    const std::int64_t rowlen = 3 * c;
    const bool trace = tracing({&v});
    Tensor out = make_output(v.shape(), trace);
    auto scales = std::make_shared<std::vector<double>>(rows);
    const auto& dv = v.data();
    auto& dout = out.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        double ms = 0.0;
        const double* p = dv.data() + r * rowlen;
        for (std::int64_t i = 0; i < rowlen; ++i) ms += p[i] * p[i];
        ms /= static_cast<double>(c);
        const double scale = 1.0 / std::sqrt(ms + eps);
        (*scales)[r] = scale;
        for (std::int64_t i = 0; i < rowlen; ++i) dout[r * rowlen + i] = scale * p[i];
    }
    if (trace) {
        Tensor vc = v, oc = out;
        g_active_tape->record("vector_rms_norm", [vc, oc, rows, rowlen, c, scales]() mutable {
            if (!vc.requires_grad()) return;
            auto& gv = vc.grad();
            const auto& g = oc.grad();
            const auto& x = vc.data();
            for (std::int64_t r = 0; r < rows; ++r) {
                const double scale = (*scales)[r];
                const double* gr = g.data() + r * rowlen;
                const double* xr = x.data() + r * rowlen;
                double dot = 0.0;
                for (std::int64_t i = 0; i < rowlen; ++i) dot += gr[i] * xr[i];
                const double coef = scale * scale * scale * dot / static_cast<double>(c);
                double* dst = gv.data() + r * rowlen;
                for (std::int64_t i = 0; i < rowlen; ++i)
                    dst[i] += scale * gr[i] - coef * xr[i];
            }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.rank() < 1) throw std::invalid_argument("layer_norm: rank must be >= 1");
    const std::int64_t f = x.dim(-1);
    if (gamma.numel() != f || beta.numel() != f)
        throw std::invalid_argument("layer_norm: gain/shift must have the feature extent");
    const std::int64_t rows = x.numel() / f;
    const bool trace = tracing({&x, &gamma, &beta});
    Tensor out = make_output(x.shape(), trace);
    // Saved per-row stats for the backward pass.
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    auto xhat = std::make_shared<std::vector<double>>(x.numel());
    const auto& dx = x.data();
    const auto& dgm = gamma.data();
    const auto& dbt = beta.data();
    auto& dout = out.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* p = dx.data() + r * f;
        double mean = 0.0;
        for (std::int64_t j = 0; j < f; ++j) mean += p[j];
        mean /= static_cast<double>(f);
        double var = 0.0;
        for (std::int64_t j = 0; j < f; ++j) var += (p[j] - mean) * (p[j] - mean);
        var /= static_cast<double>(f);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        for (std::int64_t j = 0; j < f; ++j) {
            const double xh = (p[j] - mean) * is;
            (*xhat)[r * f + j] = xh;
            dout[r * f + j] = dgm[j] * xh + dbt[j];
        }
    }
    if (trace) {
        Tensor xc = x, gm = gamma, bt = beta, oc = out;
        g_active_tape->record("layer_norm", [xc, gm, bt, oc, rows, f, inv_std, xhat]() mutable {
            const auto& g = oc.grad();
            if (gm.requires_grad()) {
                auto& gg = gm.grad();
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t j = 0; j < f; ++j)
                        gg[j] += g[r * f + j] * (*xhat)[r * f + j];
            }
            if (bt.requires_grad()) {
                auto& gb = bt.grad();
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t j = 0; j < f; ++j) gb[j] += g[r * f + j];
            }
            if (xc.requires_grad()) {
                auto& gx = xc.grad();
                const auto& dgm = gm.data();
                for (std::int64_t r = 0; r < rows; ++r) {
                    double sum_dh = 0.0, sum_dh_xh = 0.0;
                    for (std::int64_t j = 0; j < f; ++j) {
                        const double dh = g[r * f + j] * dgm[j];
                        sum_dh += dh;
                        sum_dh_xh += dh * (*xhat)[r * f + j];
                    }
                    const double inv_f = 1.0 / static_cast<double>(f);
                    for (std::int64_t j = 0; j < f; ++j) {
                        const double dh = g[r * f + j] * dgm[j];
                        gx[r * f + j] += (*inv_std)[r] *
                                         (dh - inv_f * sum_dh -
                                          (*xhat)[r * f + j] * inv_f * sum_dh_xh);
                    }
                }
            }
        });
    }
    return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                             double smoothing) {
    if (logits.rank() != 2 || logits.dim(1) != 4)
        throw std::invalid_argument("softmax_cross_entropy: logits must be [n, 4]");
    if (smoothing < 0.0 || smoothing >= 1.0)
        throw std::invalid_argument("softmax_cross_entropy: smoothing must be in [0, 1)");
    const std::int64_t n = logits.dim(0);
    if (static_cast<std::int64_t>(targets.size()) != n)
        throw std::invalid_argument("softmax_cross_entropy: target count mismatch");
    for (int t : targets)
        if (t < 0 || t > 3)
            throw std::invalid_argument("softmax_cross_entropy: target index out of {0..3}");
    const bool trace = tracing({&logits});
    Tensor out = make_output({}, trace);
    auto probs = std::make_shared<std::vector<double>>(logits.numel());
    const auto& z = logits.data();
    double loss = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double* row = z.data() + 4 * i;
        const double zmax = std::max(std::max(row[0], row[1]), std::max(row[2], row[3]));
        double sum = 0.0;
        for (int j = 0; j < 4; ++j) sum += std::exp(row[j] - zmax);
        const double lse = zmax + std::log(sum);
        for (int j = 0; j < 4; ++j) {
            const double q = (j == targets[i] ? 1.0 - smoothing : 0.0) + smoothing / 4.0;
            loss -= q * (row[j] - lse);
            (*probs)[4 * i + j] = std::exp(row[j] - lse);
        }
    }
    out.data()[0] = loss / static_cast<double>(n);
    if (trace) {
        Tensor lc = logits, oc = out;
        g_active_tape->record("softmax_cross_entropy",
                              [lc, oc, targets, smoothing, n, probs]() mutable {
                                  if (!lc.requires_grad()) return;
                                  auto& gl = lc.grad();
                                  const double g = oc.grad()[0] / static_cast<double>(n);
                                  for (std::int64_t i = 0; i < n; ++i)
                                      for (int j = 0; j < 4; ++j) {
                                          const double q =
                                              (j == targets[i] ? 1.0 - smoothing : 0.0) +
                                              smoothing / 4.0;
                                          gl[4 * i + j] += g * ((*probs)[4 * i + j] - q);
                                      }
                              });
    }
    return out;
}

}  // namespace rnadesign
