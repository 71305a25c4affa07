#pragma once

// Sampling-based checks of the standing assumptions: bounded Lipschitz
// coefficients with a positive short rate (regularity), uniformly elliptic
// sigma sigma' and Lambda Lambda' (ellipticity), and a Lyapunov function v
// whose controlled generator tends to -infinity (stability).
// Every number reported here is a lower bound on the true constant (a max over
// finitely many samples), never a proof.

#include "riskhjb/control_law.hpp"
#include "riskhjb/market_model.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace riskhjb {

struct CoefficientEstimate {
    std::string name;
    double lipschitz = 0.0;  ///< max ||f(x) - f(y)|| / ||x - y|| over sampled pairs
    double bound = 0.0;      ///< max ||f(x)|| over grid nodes (Frobenius for matrices)
};

struct AssumptionReport {
    std::vector<CoefficientEstimate> coefficients;  ///< a, mu, sigma, lambda, r
    double asset_ellipticity = 0.0;   ///< min eigenvalue of sigma sigma' over nodes
    double factor_ellipticity = 0.0;  ///< min eigenvalue of Lambda Lambda' over nodes
    double ellipticity_delta0 = 0.0;  ///< min of the two
    double min_rate = 0.0;
    bool regularity_pass = false;
    bool ellipticity_pass = false;
    std::size_t nodes_sampled = 0;
    std::size_t pairs_sampled = 0;
    std::vector<std::string> warnings;

    const CoefficientEstimate& coefficient(const std::string& name) const;
};

/// Lipschitz constants from `pair_samples` point pairs drawn in the grid box
/// (the sample sequence for N pairs is a prefix of the one for N+1), bounds
/// and ellipticity from every grid node.
AssumptionReport validate_assumptions(const MarketModel& model, const Grid& grid, int pair_samples,
                                      std::uint64_t seed = 0x5eed);

struct LyapunovCandidate {
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;
    std::function<Matrix(const Vector&)> hessian;
    int declared_growth_degree = 2;  ///< polynomial degree bounding |grad v|; recorded, not certified
};

/// v(x) = |x|^2.
LyapunovCandidate quadratic_lyapunov(int factors);

struct ControlBox {
    Vector h_lower;
    Vector h_upper;
    Vector omega_lower;
    Vector omega_upper;

    static ControlBox symmetric(int assets, int noise_dim, double h_radius, double omega_radius);
    void validate(int assets, int noise_dim) const;
};

struct LyapunovShell {
    double radius = 0.0;
    double max_generator = 0.0;  ///< max of L^{h,omega} v over sampled x on the shell and the whole box
    double min_value = 0.0;      ///< min of v over the sampled shell points
    std::size_t points = 0;
};

struct LyapunovReport {
    std::vector<LyapunovShell> shells;
    bool nonnegative = true;
    bool consistent = false;  ///< drift condition looks plausible on the sampled shells
    int declared_growth_degree = 0;
};

/// L^{h,omega} v is affine in (h, omega), so the max over the box is taken
/// exactly at the optimal vertex rather than by sampling controls.
LyapunovReport check_lyapunov(const MarketModel& model, const LyapunovCandidate& cand,
                              const ControlParams& params, const std::vector<double>& radii,
                              const ControlBox& box, int directions = 64);

}  // namespace riskhjb
