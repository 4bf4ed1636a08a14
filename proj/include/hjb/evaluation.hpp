#pragma once

#include "hjb/dataset.hpp"
#include "hjb/system.hpp"
#include "hjb/value_net.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace hjb {

/// Scalar field sampled on a mesh; values(i, j) is at (x1[i], x2[j]).
struct SurfaceGrid {
    std::string quantity;
    std::vector<double> x1;
    std::vector<double> x2;
    Eigen::MatrixXd values;
};

/// Any costate model: the learned network or an analytic oracle.
using CostateFn = std::function<Vec(const Vec&)>;

CostateFn network_costate(const NetworkParams& params);
CostateFn analytic_costate_fn(const AffineSystem& sys);

struct MseSurfaces {
    SurfaceGrid lambda1;
    SurfaceGrid lambda2;
    SurfaceGrid control;
};

/// Pointwise squared error of the model costate and its control against the
/// analytic ones.
MseSurfaces mse_surfaces(const CostateFn& model, const AffineSystem& sys, const Domain& domain);
MseSurfaces mse_surfaces(const NetworkParams& params, const AffineSystem& sys, const Domain& domain);

/// H(x, u(x), lambda(x)) with u the control minimizing H for the model costate.
SurfaceGrid hamiltonian_surface(const CostateFn& model, const AffineSystem& sys, const Domain& domain);
SurfaceGrid hamiltonian_surface(const NetworkParams& params, const AffineSystem& sys, const Domain& domain);

struct Reconstruction {
    SurfaceGrid lambda1_learned;
    SurfaceGrid lambda2_learned;
    SurfaceGrid control_learned;
    SurfaceGrid lambda1_analytic;
    SurfaceGrid lambda2_analytic;
    SurfaceGrid control_analytic;
};

Reconstruction reconstruct_surfaces(const CostateFn& model, const AffineSystem& sys, const Domain& domain);
Reconstruction reconstruct_surfaces(const NetworkParams& params, const AffineSystem& sys, const Domain& domain);

/// `# quantity=<name>` line, then `x1,x2,value` rows with x1 outer.
std::string surface_to_csv(const SurfaceGrid& grid);
void save_surface(const std::filesystem::path& path, const SurfaceGrid& grid);

} // namespace hjb
