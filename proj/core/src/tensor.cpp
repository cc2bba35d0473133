#include "btnet/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <sstream>
#include <thread>

namespace btnet {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
    for (std::size_t d : shape_) {
        if (d == 0) throw ShapeError("zero-length mode in shape " + shape_to_string(shape_));
    }
    data_.assign(shape_size(shape_), 0.0);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    for (std::size_t d : shape_) {
        if (d == 0) throw ShapeError("zero-length mode in shape " + shape_to_string(shape_));
    }
    if (shape_size(shape_) != data_.size()) {
        throw ShapeError("buffer of " + std::to_string(data_.size()) +
                         " elements does not match shape " + shape_to_string(shape_));
    }
}

DenseTensor DenseTensor::scalar(double v) {
    DenseTensor t;
    t.data_[0] = v;
    return t;
}

std::size_t DenseTensor::offset(std::span<const std::size_t> idx) const {
    if (idx.size() != shape_.size()) throw ShapeError("index order mismatch");
    std::size_t flat = 0;
    for (std::size_t m = 0; m < shape_.size(); ++m) {
        if (idx[m] >= shape_[m]) throw std::out_of_range("tensor index out of range");
        flat = flat * shape_[m] + idx[m];
    }
    return flat;
}

double& DenseTensor::at(std::span<const std::size_t> idx) { return data_[offset(idx)]; }
double DenseTensor::at(std::span<const std::size_t> idx) const { return data_[offset(idx)]; }

DenseTensor DenseTensor::reshape(Shape new_shape) const {
    if (shape_size(new_shape) != data_.size()) {
        throw ShapeError("reshape " + shape_to_string(shape_) + " -> " +
                         shape_to_string(new_shape) + ": element count differs");
    }
    return DenseTensor(std::move(new_shape), data_);
}

static void check_permutation(const std::vector<std::size_t>& perm, std::size_t n) {
    if (perm.size() != n) throw std::invalid_argument("permutation length mismatch");
    std::vector<bool> seen(n, false);
    for (std::size_t p : perm) {
        if (p >= n || seen[p]) throw std::invalid_argument("invalid mode permutation");
        seen[p] = true;
    }
}

std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& perm) {
    std::vector<std::size_t> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
    return inv;
}

DenseTensor DenseTensor::permute(const std::vector<std::size_t>& perm) const {
    const std::size_t n = order();
    check_permutation(perm, n);

    Shape out_shape(n);
    for (std::size_t m = 0; m < n; ++m) out_shape[m] = shape_[perm[m]];

    // Strides of the source modes, read in output order.
    std::vector<std::size_t> src_stride(n, 1);
    for (std::size_t m = n; m-- > 1;) src_stride[m - 1] = src_stride[m] * shape_[m];
    std::vector<std::size_t> stride(n);
    for (std::size_t m = 0; m < n; ++m) stride[m] = src_stride[perm[m]];

    DenseTensor out(out_shape);
    std::vector<std::size_t> idx(n, 0);
    std::size_t src = 0;
    const std::size_t total = data_.size();
    for (std::size_t flat = 0; flat < total; ++flat) {
        out.data_[flat] = data_[src];
        // odometer increment over the output index
        for (std::size_t m = n; m-- > 0;) {
            src += stride[m];
            if (++idx[m] < out_shape[m]) break;
            src -= stride[m] * out_shape[m];
            idx[m] = 0;
        }
    }
    return out;
}

DenseTensor DenseTensor::unfold(const ModeSplit& split) const {
    const std::size_t n = order();
    std::vector<std::size_t> all = split.row_modes;
    all.insert(all.end(), split.col_modes.begin(), split.col_modes.end());
    check_permutation(all, n);  // disjoint and covering

    std::size_t rows = 1, cols = 1;
    for (std::size_t m : split.row_modes) rows *= shape_[m];
    for (std::size_t m : split.col_modes) cols *= shape_[m];
    return permute(all).reshape({rows, cols});
}

// ---- matmul -----------------------------------------------------------

namespace {
std::atomic<unsigned> g_max_threads{1};
std::atomic<std::uint64_t> g_multiplies{0};

template <typename RowKernel>
void run_rows(std::size_t m, RowKernel&& kernel) {
    unsigned want = g_max_threads.load(std::memory_order_relaxed);
    if (want <= 1 || m < 2 * want) {
        for (std::size_t i = 0; i < m; ++i) kernel(i);
        return;
    }
    unsigned nt = std::min<std::size_t>(want, m);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (unsigned t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < m; i += nt) kernel(i);
        });
    }
    for (auto& th : pool) th.join();
}
}  // namespace

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    run_rows(n, [&](std::size_t i) { fn(i); });
}

void set_max_threads(unsigned n) { g_max_threads.store(n == 0 ? 1 : n); }
unsigned max_threads() { return g_max_threads.load(); }

namespace flops {
void reset() { g_multiplies.store(0); }
std::uint64_t multiplies() { return g_multiplies.load(); }
void add(std::uint64_t n) { g_multiplies.fetch_add(n, std::memory_order_relaxed); }
}  // namespace flops

void matmul(const double* a, std::size_t m, std::size_t k,
            const double* b, std::size_t n, double* c) {
    flops::add(static_cast<std::uint64_t>(m) * k * n);
    run_rows(m, [&](std::size_t i) {
        double* ci = c + i * n;
        std::fill(ci, ci + n, 0.0);
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    });
}

void matmul_nt(const double* a, std::size_t m, std::size_t k,
               const double* b, std::size_t n, double* c) {
    flops::add(static_cast<std::uint64_t>(m) * k * n);
    run_rows(m, [&](std::size_t i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    });
}

void matmul_tn(const double* a, std::size_t m, std::size_t k,
               const double* b, std::size_t n, double* c) {
    // A is k x m, result m x n.
    flops::add(static_cast<std::uint64_t>(m) * k * n);
    run_rows(m, [&](std::size_t i) {
        double* ci = c + i * n;
        std::fill(ci, ci + n, 0.0);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[p * m + i];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    });
}

// ---- contraction ------------------------------------------------------

namespace {
struct ContractionPlan {
    std::vector<std::size_t> a_contr, b_contr;  // in pair order
    std::vector<std::size_t> a_free, b_free;    // ascending
    Shape out_shape;
    std::size_t m = 1, k = 1, n = 1;
};

ContractionPlan plan_contraction(const DenseTensor& a, const DenseTensor& b,
                                 const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    ContractionPlan p;
    std::vector<bool> a_used(a.order(), false), b_used(b.order(), false);
    for (const auto& [am, bm] : pairs) {
        if (am >= a.order() || bm >= b.order())
            throw std::invalid_argument("contraction pair names a non-existent mode");
        if (a_used[am] || b_used[bm])
            throw std::invalid_argument("contraction pair repeats a mode");
        if (a.dim(am) != b.dim(bm)) {
            throw ShapeError("contraction dimension mismatch: a mode " + std::to_string(am) +
                             " has length " + std::to_string(a.dim(am)) + ", b mode " +
                             std::to_string(bm) + " has length " + std::to_string(b.dim(bm)));
        }
        a_used[am] = true;
        b_used[bm] = true;
        p.a_contr.push_back(am);
        p.b_contr.push_back(bm);
        p.k *= a.dim(am);
    }
    for (std::size_t m = 0; m < a.order(); ++m) {
        if (!a_used[m]) {
            p.a_free.push_back(m);
            p.out_shape.push_back(a.dim(m));
            p.m *= a.dim(m);
        }
    }
    for (std::size_t m = 0; m < b.order(); ++m) {
        if (!b_used[m]) {
            p.b_free.push_back(m);
            p.n *= b.dim(m);
        }
    }
    for (std::size_t m : p.b_free) p.out_shape.push_back(b.dim(m));
    return p;
}

/// Reshape a (rows x cols) buffer to the given mode order, then permute
/// back so mode_order[m] becomes mode m again.
DenseTensor refold(const DenseTensor& mat, const Shape& full_shape,
                   const std::vector<std::size_t>& mode_order) {
    Shape ordered;
    ordered.reserve(mode_order.size());
    for (std::size_t m : mode_order) ordered.push_back(full_shape[m]);
    return mat.reshape(ordered).permute(inverse_permutation(mode_order));
}
}  // namespace

DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    ContractionPlan p = plan_contraction(a, b, pairs);
    DenseTensor am = a.unfold({p.a_free, p.a_contr});
    DenseTensor bm = b.unfold({p.b_contr, p.b_free});
    std::vector<double> out(p.m * p.n);
    matmul(am.data(), p.m, p.k, bm.data(), p.n, out.data());
    return DenseTensor(p.out_shape, std::move(out));
}

std::pair<DenseTensor, DenseTensor>
contract_backward(const DenseTensor& a, const DenseTensor& b,
                  const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                  const DenseTensor& grad_out) {
    ContractionPlan p = plan_contraction(a, b, pairs);
    if (grad_out.size() != p.m * p.n) {
        throw ShapeError("contract_backward: gradient shape " +
                         shape_to_string(grad_out.shape()) + " does not match output " +
                         shape_to_string(p.out_shape));
    }
    DenseTensor am = a.unfold({p.a_free, p.a_contr});
    DenseTensor bm = b.unfold({p.b_contr, p.b_free});

    // dA_(free;contr) = dC * B^T,  dB_(contr;free) = A^T * dC
    std::vector<double> ga(p.m * p.k), gb(p.k * p.n);
    matmul_nt(grad_out.data(), p.m, p.n, bm.data(), p.k, ga.data());
    matmul_tn(am.data(), p.k, p.m, grad_out.data(), p.n, gb.data());

    std::vector<std::size_t> a_order = p.a_free;
    a_order.insert(a_order.end(), p.a_contr.begin(), p.a_contr.end());
    std::vector<std::size_t> b_order = p.b_contr;
    b_order.insert(b_order.end(), p.b_free.begin(), p.b_free.end());

    DenseTensor grad_a = refold(DenseTensor({p.m, p.k}, std::move(ga)), a.shape(), a_order);
    DenseTensor grad_b = refold(DenseTensor({p.k, p.n}, std::move(gb)), b.shape(), b_order);
    return {std::move(grad_a), std::move(grad_b)};
}

}  // namespace btnet
