#pragma once

// Channel geometry: the wall profile h, the tensor grid on the reference
// rectangle T x [-1, 1] and the vertical-stretch map onto
//
//     D_h = { (x, y) : x in T, -(1 + h(x)) <= y <= 1 + h(x) }.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cateye {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// One Fourier mode k with amplitude.
struct Mode {
    int k = 0;
    double amplitude = 0.0;
    bool operator==(const Mode&) const = default;
};

/// Wall shape h(x) = sum a_k cos(kx) + sum b_k sin(kx) on the 2*pi circle.
class BoundaryProfile {
public:
    BoundaryProfile() = default;
    BoundaryProfile(std::vector<Mode> cosine, std::vector<Mode> sine)
        : cos_(std::move(cosine)), sin_(std::move(sine)) {
        for (const auto& m : cos_)
            if (m.k < 0) throw GeometryError("negative cosine wavenumber");
        for (const auto& m : sin_)
            if (m.k < 1) throw GeometryError("sine wavenumber must be >= 1");
    }

    static BoundaryProfile flat() { return {}; }
    static BoundaryProfile cosine(double eps, int k = 1) { return {{{k, eps}}, {}}; }

    const std::vector<Mode>& cosine_coeffs() const { return cos_; }
    const std::vector<Mode>& sine_coeffs() const { return sin_; }

    /// n-th derivative of h at x (n = 0 is the value); exact term-by-term.
    double derivative(double x, int n = 0) const {
        double s = 0.0;
        for (const auto& m : cos_) s += m.amplitude * trig_derivative(m.k, x, n, true);
        for (const auto& m : sin_) s += m.amplitude * trig_derivative(m.k, x, n, false);
        return s;
    }
    double operator()(double x) const { return derivative(x, 0); }

    int highest_mode() const {
        int k = 0;
        for (const auto& m : cos_) k = std::max(k, m.k);
        for (const auto& m : sin_) k = std::max(k, m.k);
        return k;
    }

    /// h' == 0 exactly iff every amplitude with k >= 1 vanishes.
    bool is_flat() const {
        auto nonzero = [](const Mode& m) { return m.k >= 1 && m.amplitude != 0.0; };
        return std::none_of(cos_.begin(), cos_.end(), nonzero) &&
               std::none_of(sin_.begin(), sin_.end(), nonzero);
    }

    /// max |h| by dense sampling at no fewer than 8 points per highest mode.
    double max_abs(std::size_t min_samples = 256) const {
        const std::size_t n =
            std::max<std::size_t>(min_samples, 16 * static_cast<std::size_t>(highest_mode() + 1));
        double mx = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            mx = std::max(mx, std::abs((*this)(two_pi * static_cast<double>(i) / static_cast<double>(n))));
        return mx;
    }

    void validate() const {
        if (!(max_abs() < 1.0))
            throw GeometryError("wall profile violates |h| < 1 (max |h| = " + std::to_string(max_abs()) + ")");
    }

    /// Same shape with every amplitude multiplied by eps.
    BoundaryProfile scaled(double eps) const {
        BoundaryProfile p = *this;
        for (auto& m : p.cos_) m.amplitude *= eps;
        for (auto& m : p.sin_) m.amplitude *= eps;
        return p;
    }

    bool operator==(const BoundaryProfile&) const = default;

private:
    static double trig_derivative(int k, double x, int n, bool is_cos) {
        // d^n/dx^n cos(kx) = k^n cos(kx + n*pi/2); likewise for sin.
        const double kk = static_cast<double>(k);
        const double scale = std::pow(kk, n);
        if (k == 0) return (n == 0 && is_cos) ? 1.0 : 0.0;
        const int phase = n % 4;
        const double c = std::cos(kk * x), s = std::sin(kk * x);
        if (is_cos) {
            switch (phase) {
                case 0: return scale * c;
                case 1: return -scale * s;
                case 2: return -scale * c;
                default: return scale * s;
            }
        }
        switch (phase) {
            case 0: return scale * s;
            case 1: return scale * c;
            case 2: return -scale * s;
            default: return -scale * c;
        }
    }

    std::vector<Mode> cos_;
    std::vector<Mode> sin_;
};

/// Tensor grid on T x [-1, 1] with the map (x, eta) -> (x, eta * J(x)),
/// J(x) = H (1 + h(x)). H is the base half-height (1 for D_h).
///
/// Node (i, j) is stored at index j * nx + i. The x direction is periodic
/// without a duplicated seam column; eta includes both walls.
class ChannelGrid {
public:
    ChannelGrid(BoundaryProfile profile, std::size_t nx, std::size_t ny, double half_height = 1.0)
        : profile_(std::move(profile)), nx_(nx), ny_(ny), half_height_(half_height) {
        if (nx < 16) throw GeometryError("nx must be >= 16");
        if (ny < 17) throw GeometryError("ny must be >= 17");
        if (ny % 2 == 0) throw GeometryError("ny must be odd so the centerline is a grid line");
        if (!(half_height > 0.0)) throw GeometryError("half height must be positive");
        profile_.validate();

        dx_ = two_pi / static_cast<double>(nx);
        deta_ = 2.0 / static_cast<double>(ny - 1);
        x_.resize(nx);
        eta_.resize(ny);
        h_.resize(nx);
        hp_.resize(nx);
        hpp_.resize(nx);
        jac_.resize(nx);
        jacp_.resize(nx);
        jacpp_.resize(nx);
        for (std::size_t i = 0; i < nx; ++i) {
            const double x = dx_ * static_cast<double>(i);
            x_[i] = x;
            h_[i] = profile_.derivative(x, 0);
            hp_[i] = profile_.derivative(x, 1);
            hpp_[i] = profile_.derivative(x, 2);
            jac_[i] = half_height * (1.0 + h_[i]);
            jacp_[i] = half_height * hp_[i];
            jacpp_[i] = half_height * hpp_[i];
        }
        const std::size_t c = center_row();
        for (std::size_t j = 0; j < ny; ++j) {
            // Symmetric construction so that eta(ny-1-j) == -eta(j) bit for bit.
            const double k = static_cast<double>(static_cast<long>(j) - static_cast<long>(c));
            eta_[j] = k * deta_;
        }
        eta_.front() = -1.0;
        eta_.back() = 1.0;
    }

    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }
    std::size_t size() const { return nx_ * ny_; }
    std::size_t center_row() const { return (ny_ - 1) / 2; }
    std::size_t index(std::size_t i, std::size_t j) const { return j * nx_ + i; }
    double dx() const { return dx_; }
    double deta() const { return deta_; }
    double half_height() const { return half_height_; }
    const BoundaryProfile& profile() const { return profile_; }

    double x(std::size_t i) const { return x_[i]; }
    double eta(std::size_t j) const { return eta_[j]; }
    double h(std::size_t i) const { return h_[i]; }
    double h_prime(std::size_t i) const { return hp_[i]; }
    double h_second(std::size_t i) const { return hpp_[i]; }
    /// J = H(1 + h), the vertical stretch and the area weight of the map.
    double jacobian(std::size_t i) const { return jac_[i]; }
    double jacobian_prime(std::size_t i) const { return jacp_[i]; }
    double jacobian_second(std::size_t i) const { return jacpp_[i]; }
    std::span<const double> jacobians() const { return jac_; }

    /// J and its derivatives at an arbitrary x (face midpoints, tracer).
    double jacobian_at(double x, int n = 0) const {
        return n == 0 ? half_height_ * (1.0 + profile_.derivative(x, 0))
                      : half_height_ * profile_.derivative(x, n);
    }

    std::pair<double, double> physical_coords(std::size_t i, std::size_t j) const {
        if (i >= nx_ || j >= ny_) throw std::out_of_range("grid index out of range");
        return {x_[i], eta_[j] * jac_[i]};
    }

    bool is_wall_row(std::size_t j) const { return j == 0 || j + 1 == ny_; }

    double min_spacing() const {
        const double jmin = *std::min_element(jac_.begin(), jac_.end());
        return std::min(dx_, deta_ * jmin);
    }

private:
    BoundaryProfile profile_;
    std::size_t nx_, ny_;
    double half_height_;
    double dx_ = 0.0, deta_ = 0.0;
    std::vector<double> x_, eta_, h_, hp_, hpp_, jac_, jacp_, jacpp_;
};

using GridPtr = std::shared_ptr<const ChannelGrid>;

inline GridPtr build_grid(const BoundaryProfile& profile, std::size_t nx, std::size_t ny,
                          double half_height = 1.0) {
    return std::make_shared<const ChannelGrid>(profile, nx, ny, half_height);
}

inline double eval_profile(const BoundaryProfile& profile, double x) { return profile(x); }

/// Nodal values of a scalar on a ChannelGrid.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(GridPtr grid, double fill = 0.0)
        : grid_(std::move(grid)), values_(grid_->size(), fill) {}
    ScalarField(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_->size()) throw GeometryError("field size does not match grid");
    }

    /// Samples f(x, y) at the physical node positions.
    template <class F>
    static ScalarField sample(GridPtr grid, F&& f) {
        ScalarField s(grid);
        for (std::size_t j = 0; j < grid->ny(); ++j)
            for (std::size_t i = 0; i < grid->nx(); ++i) {
                auto [x, y] = grid->physical_coords(i, j);
                s(i, j) = f(x, y);
            }
        return s;
    }

    const GridPtr& grid() const { return grid_; }
    const ChannelGrid& g() const { return *grid_; }
    double& operator()(std::size_t i, std::size_t j) { return values_[j * grid_->nx() + i]; }
    double operator()(std::size_t i, std::size_t j) const { return values_[j * grid_->nx() + i]; }
    double& operator[](std::size_t k) { return values_[k]; }
    double operator[](std::size_t k) const { return values_[k]; }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }
    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    ScalarField& operator*=(double a) {
        for (double& v : values_) v *= a;
        return *this;
    }

private:
    GridPtr grid_;
    std::vector<double> values_;
};

/// Physical vector field (first, second component).
struct VectorField {
    ScalarField first;
    ScalarField second;
};

inline void require_same_grid(const ScalarField& a, const ScalarField& b) {
    if (a.grid() != b.grid() &&
        (a.g().nx() != b.g().nx() || a.g().ny() != b.g().ny() || !(a.g().profile() == b.g().profile()) ||
         a.g().half_height() != b.g().half_height()))
        throw GeometryError("fields live on different grids");
}

}  // namespace cateye
