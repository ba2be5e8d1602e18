#pragma once

// Structured grids with homogeneous Dirichlet boundary: domains (interval,
// rectangle, masked planar sets), grid functions, the 3/5-point Laplacian and
// the node-based quadrature that goes with it.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "pmelab/errors.hpp"

namespace pmelab {

class Domain;
using DomainHandle = std::shared_ptr<const Domain>;

/// A uniform lattice of nodes strictly inside [0,Lx]x[0,Ly] (or [0,L]), of
/// which the mask-true nodes are unknowns. All other nodes, and the frame of
/// the box, carry the value 0.
class Domain {
public:
    static DomainHandle interval(double length, int cells) {
        return make(1, {length, 1.0}, {cells, 2}, {});
    }

    static DomainHandle rectangle(double lx, double ly, int nx, int ny) {
        return make(2, {lx, ly}, {nx, ny}, {});
    }

    /// `mask` is indexed i + (nx-1) j over the (nx-1)x(ny-1) inner lattice.
    static DomainHandle masked(double lx, double ly, int nx, int ny, std::vector<std::uint8_t> mask) {
        return make(2, {lx, ly}, {nx, ny}, std::move(mask));
    }

    /// Staircase disk of the given radius inscribed in a square of `cells` per side.
    static DomainHandle disk(double radius, int cells) {
        const int n = cells - 1;
        const double h = 2.0 * radius / cells;
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(n) * n, 0);
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                const double x = (i + 1) * h - radius, y = (j + 1) * h - radius;
                mask[static_cast<std::size_t>(i + n * j)] = (x * x + y * y < radius * radius) ? 1 : 0;
            }
        }
        return masked(2.0 * radius, 2.0 * radius, cells, cells, std::move(mask));
    }

    int dimension() const noexcept { return dim_; }
    std::array<double, 2> extent() const noexcept { return extent_; }
    std::array<int, 2> resolution() const noexcept { return res_; }
    std::array<double, 2> spacing() const noexcept { return h_; }
    double cell_volume() const noexcept { return dim_ == 1 ? h_[0] : h_[0] * h_[1]; }
    /// Number of unknowns (mask-true nodes).
    std::size_t size() const noexcept { return nodes_.size(); }
    int lattice_nx() const noexcept { return res_[0] - 1; }
    int lattice_ny() const noexcept { return dim_ == 1 ? 1 : res_[1] - 1; }
    const std::vector<std::uint8_t>& mask() const noexcept { return mask_; }
    bool is_rectangular() const noexcept {
        return std::all_of(mask_.begin(), mask_.end(), [](std::uint8_t b) { return b != 0; });
    }

    /// Unknown index of lattice node (i, j), or -1 outside the interior.
    int index_of(int i, int j) const noexcept {
        if (i < 0 || j < 0 || i >= lattice_nx() || j >= lattice_ny()) return -1;
        return lookup_[static_cast<std::size_t>(i + lattice_nx() * j)];
    }

    std::array<int, 2> lattice_position(std::size_t k) const { return nodes_[k]; }

    std::array<double, 2> coordinates(std::size_t k) const {
        const auto [i, j] = nodes_[k];
        return {(i + 1) * h_[0], dim_ == 1 ? 0.0 : (j + 1) * h_[1]};
    }

    /// Neighbor unknown indices ordered (-x, +x, -y, +y); -1 marks a boundary value.
    const std::array<int, 4>& neighbors(std::size_t k) const { return neighbors_[k]; }

    /// Same lattice (extent, resolution, dimension); masks may differ.
    bool same_lattice(const Domain& o) const noexcept {
        return dim_ == o.dim_ && extent_ == o.extent_ && res_ == o.res_;
    }

    friend bool operator==(const Domain& a, const Domain& b) noexcept {
        return a.same_lattice(b) && a.mask_ == b.mask_;
    }

    /// Interior after removing every node within `layers` lattice steps
    /// (Chebyshev distance) of a non-interior node.
    DomainHandle eroded(int layers) const {
        std::vector<std::uint8_t> out(mask_.size(), 0);
        for (int j = 0; j < lattice_ny(); ++j) {
            for (int i = 0; i < lattice_nx(); ++i) {
                bool keep = index_of(i, j) >= 0;
                for (int dj = (dim_ == 1 ? 0 : -layers); keep && dj <= (dim_ == 1 ? 0 : layers); ++dj)
                    for (int di = -layers; keep && di <= layers; ++di)
                        keep = index_of(i + di, j + dj) >= 0;
                out[static_cast<std::size_t>(i + lattice_nx() * j)] = keep ? 1 : 0;
            }
        }
        return with_mask(std::move(out));
    }

    /// A domain on the same lattice restricted to `mask` (validated).
    DomainHandle with_mask(std::vector<std::uint8_t> mask) const {
        return make(dim_, extent_, res_, std::move(mask));
    }

private:
    static DomainHandle make(int dim, std::array<double, 2> extent, std::array<int, 2> res,
                             std::vector<std::uint8_t> mask) {
        return std::shared_ptr<const Domain>(new Domain(dim, extent, res, std::move(mask)));
    }

    Domain(int dim, std::array<double, 2> extent, std::array<int, 2> res, std::vector<std::uint8_t> mask)
        : dim_(dim), extent_(extent), res_(res) {
        if (dim != 1 && dim != 2) throw ContractViolation("Domain: dimension must be 1 or 2");
        if (dim == 1) {
            extent_[1] = 1.0;
            res_[1] = 2;
        }
        for (int a = 0; a < dim; ++a) {
            if (!(extent_[a] > 0.0) || !std::isfinite(extent_[a]))
                throw ContractViolation("Domain: extent must be positive");
            if (res_[a] - 1 < 8) throw ContractViolation("Domain: need at least 8 interior nodes per axis");
        }
        h_ = {extent_[0] / res_[0], dim == 1 ? 1.0 : extent_[1] / res_[1]};
        const std::size_t lattice = static_cast<std::size_t>(lattice_nx()) * lattice_ny();
        if (mask.empty()) mask.assign(lattice, 1);
        if (mask.size() != lattice) throw ContractViolation("Domain: mask size does not match lattice");
        mask_ = std::move(mask);

        lookup_.assign(lattice, -1);
        int lo[2] = {lattice_nx(), lattice_ny()}, hi[2] = {-1, -1};
        for (int j = 0; j < lattice_ny(); ++j) {
            for (int i = 0; i < lattice_nx(); ++i) {
                const std::size_t c = static_cast<std::size_t>(i + lattice_nx() * j);
                if (!mask_[c]) continue;
                lookup_[c] = static_cast<int>(nodes_.size());
                nodes_.push_back({i, j});
                lo[0] = std::min(lo[0], i); hi[0] = std::max(hi[0], i);
                lo[1] = std::min(lo[1], j); hi[1] = std::max(hi[1], j);
            }
        }
        if (nodes_.empty()) throw ContractViolation("Domain: empty interior");
        for (int a = 0; a < dim; ++a) {
            if (hi[a] - lo[a] + 1 < 8)
                throw ContractViolation("Domain: interior spans fewer than 8 nodes along an axis");
        }
        neighbors_.resize(nodes_.size());
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            const auto [i, j] = nodes_[k];
            neighbors_[k] = {index_of(i - 1, j), index_of(i + 1, j),
                             dim == 1 ? -1 : index_of(i, j - 1), dim == 1 ? -1 : index_of(i, j + 1)};
        }
        // Edge-connectivity of the interior.
        std::vector<std::uint8_t> seen(nodes_.size(), 0);
        std::queue<std::size_t> todo;
        todo.push(0);
        seen[0] = 1;
        std::size_t reached = 1;
        while (!todo.empty()) {
            const std::size_t k = todo.front();
            todo.pop();
            for (int nb : neighbors_[k]) {
                if (nb >= 0 && !seen[static_cast<std::size_t>(nb)]) {
                    seen[static_cast<std::size_t>(nb)] = 1;
                    ++reached;
                    todo.push(static_cast<std::size_t>(nb));
                }
            }
        }
        if (reached != nodes_.size()) throw ContractViolation("Domain: interior is not connected");
    }

    int dim_;
    std::array<double, 2> extent_;
    std::array<int, 2> res_;
    std::array<double, 2> h_{};
    std::vector<std::uint8_t> mask_;
    std::vector<int> lookup_;
    std::vector<std::array<int, 2>> nodes_;
    std::vector<std::array<int, 4>> neighbors_;
};

/// Grid function on the interior nodes of a domain.
class Field {
public:
    explicit Field(DomainHandle d) : domain_(std::move(d)), values_(domain_->size(), 0.0) {}

    Field(DomainHandle d, std::vector<double> values) : domain_(std::move(d)), values_(std::move(values)) {
        if (values_.size() != domain_->size()) throw ContractViolation("Field: value count does not match domain");
        for (double v : values_) {
            if (!std::isfinite(v)) throw ContractViolation("Field: non-finite value");
        }
    }

    /// Samples f(x, y) at the interior nodes (y = 0 in 1D).
    template <typename F>
    static Field sample(DomainHandle d, F&& f) {
        std::vector<double> v(d->size());
        for (std::size_t k = 0; k < v.size(); ++k) {
            const auto c = d->coordinates(k);
            v[k] = f(c[0], c[1]);
        }
        return Field(std::move(d), std::move(v));
    }

    const Domain& domain() const noexcept { return *domain_; }
    const DomainHandle& handle() const noexcept { return domain_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t k) const { return values_[k]; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& data() const noexcept { return values_; }

    double max() const { return *std::max_element(values_.begin(), values_.end()); }
    double min() const { return *std::min_element(values_.begin(), values_.end()); }
    double sup_norm() const {
        double s = 0.0;
        for (double v : values_) s = std::max(s, std::fabs(v));
        return s;
    }

    template <typename F>
    Field map(F&& f) const {
        std::vector<double> v(values_.size());
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(values_[k]);
        return Field(domain_, std::move(v));
    }

    friend Field operator+(const Field& a, const Field& b) { return a.zip(b, std::plus<>{}); }
    friend Field operator-(const Field& a, const Field& b) { return a.zip(b, std::minus<>{}); }
    friend Field operator*(double c, const Field& a) {
        return a.map([c](double x) { return c * x; });
    }
    friend Field operator*(const Field& a, double c) { return c * a; }
    Field operator-() const {
        return map([](double x) { return -x; });
    }

    void require_same_domain(const Field& o) const {
        if (domain_ != o.domain_ && !(*domain_ == *o.domain_))
            throw ContractViolation("Field: domain mismatch");
    }

private:
    template <typename Op>
    Field zip(const Field& b, Op op) const {
        require_same_domain(b);
        std::vector<double> v(values_.size());
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = op(values_[k], b.values_[k]);
        return Field(domain_, std::move(v));
    }

    DomainHandle domain_;
    std::vector<double> values_;
};

/// Second-order centered Laplacian with zero Dirichlet data.
inline Field laplacian(const Field& f) {
    const Domain& d = f.domain();
    const auto h = d.spacing();
    const double ix2 = 1.0 / (h[0] * h[0]), iy2 = 1.0 / (h[1] * h[1]);
    std::vector<double> out(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
        const auto& nb = d.neighbors(k);
        auto val = [&](int n) { return n >= 0 ? f[static_cast<std::size_t>(n)] : 0.0; };
        double s = (val(nb[0]) - 2.0 * f[k] + val(nb[1])) * ix2;
        if (d.dimension() == 2) s += (val(nb[2]) - 2.0 * f[k] + val(nb[3])) * iy2;
        out[k] = s;
    }
    return Field(f.handle(), std::move(out));
}

/// Sum over lattice edges touching the interior of (difference/h)^2 times the
/// cell volume; equals -<laplacian(f), f>_h exactly. Returns int |grad f|^2
/// without the 1/2 factor.
inline double dirichlet_energy(const Field& f) {
    const Domain& d = f.domain();
    const auto h = d.spacing();
    double s = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        const auto& nb = d.neighbors(k);
        for (int axis = 0; axis < d.dimension(); ++axis) {
            const double inv = 1.0 / h[static_cast<std::size_t>(axis)];
            const int lo = nb[static_cast<std::size_t>(2 * axis)];
            const int hi = nb[static_cast<std::size_t>(2 * axis + 1)];
            const double up = hi >= 0 ? f[static_cast<std::size_t>(hi)] : 0.0;
            const double dh = (up - f[k]) * inv;
            s += dh * dh;
            if (lo < 0) {
                const double dl = f[k] * inv;
                s += dl * dl;
            }
        }
    }
    return s * d.cell_volume();
}

/// Node-based quadrature of |f|^p.
inline double lp_norm_pow(const Field& f, double p) {
    if (!(p > 0.0)) throw ContractViolation("lp_norm_pow: exponent must be positive");
    double s = 0.0;
    if (p == 2.0) {
        for (double v : f.values()) s += v * v;
    } else {
        for (double v : f.values()) s += std::pow(std::fabs(v), p);
    }
    return s * f.domain().cell_volume();
}

inline double inner(const Field& a, const Field& b) {
    a.require_same_domain(b);
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s * a.domain().cell_volume();
}

inline double l2_norm(const Field& f) { return std::sqrt(lp_norm_pow(f, 2.0)); }

inline double sup_distance(const Field& f, const Field& g) {
    f.require_same_domain(g);
    double s = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) s = std::max(s, std::fabs(f[k] - g[k]));
    return s;
}

inline Field positive_part(const Field& f) {
    return f.map([](double x) { return x > 0.0 ? x : 0.0; });
}

/// min(f, 0); the signed convention, so f = positive_part + negative_part.
inline Field negative_part(const Field& f) {
    return f.map([](double x) { return x < 0.0 ? x : 0.0; });
}

/// max(-f, 0) >= 0; the unsigned convention.
inline Field negative_part_magnitude(const Field& f) {
    return f.map([](double x) { return x < 0.0 ? -x : 0.0; });
}

/// -Delta_h as a sparse symmetric positive definite matrix (without volume weight).
inline Eigen::SparseMatrix<double> negative_laplacian_matrix(const Domain& d) {
    const auto h = d.spacing();
    const double ix2 = 1.0 / (h[0] * h[0]), iy2 = 1.0 / (h[1] * h[1]);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(d.size() * 5);
    for (std::size_t k = 0; k < d.size(); ++k) {
        const int r = static_cast<int>(k);
        const auto& nb = d.neighbors(k);
        double diag = 2.0 * ix2;
        for (int a = 0; a < 2; ++a) {
            if (nb[static_cast<std::size_t>(a)] >= 0) t.emplace_back(r, nb[static_cast<std::size_t>(a)], -ix2);
        }
        if (d.dimension() == 2) {
            diag += 2.0 * iy2;
            for (int a = 2; a < 4; ++a) {
                if (nb[static_cast<std::size_t>(a)] >= 0) t.emplace_back(r, nb[static_cast<std::size_t>(a)], -iy2);
            }
        }
        t.emplace_back(r, r, diag);
    }
    Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.size()));
    A.setFromTriplets(t.begin(), t.end());
    return A;
}

/// Transfers a field between two domains on the same lattice: values at nodes
/// interior to both are kept, the rest are zero.
inline Field transfer(const Field& f, const DomainHandle& target) {
    if (!f.domain().same_lattice(*target)) throw ContractViolation("transfer: lattices differ");
    std::vector<double> v(target->size(), 0.0);
    for (std::size_t k = 0; k < f.size(); ++k) {
        const auto [i, j] = f.domain().lattice_position(k);
        const int t = target->index_of(i, j);
        if (t >= 0) v[static_cast<std::size_t>(t)] = f[k];
    }
    return Field(target, std::move(v));
}

inline Eigen::VectorXd to_eigen(const Field& f) {
    return Eigen::Map<const Eigen::VectorXd>(f.data().data(), static_cast<Eigen::Index>(f.size()));
}

inline Field from_eigen(const DomainHandle& d, const Eigen::VectorXd& v) {
    return Field(d, std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace pmelab
