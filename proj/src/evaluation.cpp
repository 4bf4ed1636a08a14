#include "hjb/evaluation.hpp"

#include "hjb/csv.hpp"

#include <stdexcept>

namespace hjb {

namespace {

SurfaceGrid empty_grid(std::string quantity, const Domain& domain) {
    domain.validate();
    SurfaceGrid g;
    g.quantity = std::move(quantity);
    for (int i = 0; i < domain.resolution; ++i) {
        g.x1.push_back(domain.coordinate(0, i));
        g.x2.push_back(domain.coordinate(1, i));
    }
    g.values = Eigen::MatrixXd::Zero(domain.resolution, domain.resolution);
    return g;
}

template <typename Fn>
void for_each_point(const SurfaceGrid& g, Fn&& fn) {
    for (std::size_t i = 0; i < g.x1.size(); ++i) {
        for (std::size_t j = 0; j < g.x2.size(); ++j) {
            Vec x(2);
            x << g.x1[i], g.x2[j];
            fn(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j), x);
        }
    }
}

void require_planar(const AffineSystem& sys) {
    if (sys.state_dim() != 2 || sys.control_dim() != 1) {
        throw std::invalid_argument("evaluation surfaces need a 2-state, 1-control system");
    }
}

} // namespace

CostateFn network_costate(const NetworkParams& params) {
    return [params](const Vec& x) -> Vec {
        ForwardTape tape;
        forward(params, x.head<2>(), tape);
        return costate(params, tape);
    };
}

CostateFn analytic_costate_fn(const AffineSystem& sys) {
    return [&sys](const Vec& x) { return sys.analytic_costate(x); };
}

MseSurfaces mse_surfaces(const CostateFn& model, const AffineSystem& sys, const Domain& domain) {
    require_planar(sys);
    MseSurfaces out{empty_grid("lambda1_sq_error", domain), empty_grid("lambda2_sq_error", domain),
                    empty_grid("u_sq_error", domain)};
    for_each_point(out.lambda1, [&](Eigen::Index i, Eigen::Index j, const Vec& x) {
        const Vec lambda = model(x);
        const Vec lambda_star = sys.analytic_costate(x);
        const double u = sys.control_from_costate(x, lambda)[0];
        const double u_star = sys.analytic_control(x)[0];
        out.lambda1.values(i, j) = (lambda[0] - lambda_star[0]) * (lambda[0] - lambda_star[0]);
        out.lambda2.values(i, j) = (lambda[1] - lambda_star[1]) * (lambda[1] - lambda_star[1]);
        out.control.values(i, j) = (u - u_star) * (u - u_star);
    });
    return out;
}

MseSurfaces mse_surfaces(const NetworkParams& params, const AffineSystem& sys, const Domain& domain) {
    return mse_surfaces(network_costate(params), sys, domain);
}

SurfaceGrid hamiltonian_surface(const CostateFn& model, const AffineSystem& sys, const Domain& domain) {
    SurfaceGrid g = empty_grid("hamiltonian", domain);
    for_each_point(g, [&](Eigen::Index i, Eigen::Index j, const Vec& x) {
        g.values(i, j) = sys.hjb_residual(x, model(x));
    });
    return g;
}

SurfaceGrid hamiltonian_surface(const NetworkParams& params, const AffineSystem& sys, const Domain& domain) {
    return hamiltonian_surface(network_costate(params), sys, domain);
}

Reconstruction reconstruct_surfaces(const CostateFn& model, const AffineSystem& sys, const Domain& domain) {
    require_planar(sys);
    Reconstruction out{
        empty_grid("lambda1_learned", domain),  empty_grid("lambda2_learned", domain),
        empty_grid("u_learned", domain),        empty_grid("lambda1_analytic", domain),
        empty_grid("lambda2_analytic", domain), empty_grid("u_analytic", domain),
    };
    for_each_point(out.lambda1_learned, [&](Eigen::Index i, Eigen::Index j, const Vec& x) {
        const Vec lambda = model(x);
        const Vec lambda_star = sys.analytic_costate(x);
        out.lambda1_learned.values(i, j) = lambda[0];
        out.lambda2_learned.values(i, j) = lambda[1];
        out.control_learned.values(i, j) = sys.control_from_costate(x, lambda)[0];
        out.lambda1_analytic.values(i, j) = lambda_star[0];
        out.lambda2_analytic.values(i, j) = lambda_star[1];
        out.control_analytic.values(i, j) = sys.analytic_control(x)[0];
    });
    return out;
}

Reconstruction reconstruct_surfaces(const NetworkParams& params, const AffineSystem& sys, const Domain& domain) {
    return reconstruct_surfaces(network_costate(params), sys, domain);
}

std::string surface_to_csv(const SurfaceGrid& grid) {
    std::string out = "# quantity=" + grid.quantity + "\nx1,x2,value\n";
    for (std::size_t i = 0; i < grid.x1.size(); ++i) {
        const std::string x1 = format_double(grid.x1[i]);
        for (std::size_t j = 0; j < grid.x2.size(); ++j) {
            out += x1;
            out += ',';
            out += format_double(grid.x2[j]);
            out += ',';
            out += format_double(grid.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            out += '\n';
        }
    }
    return out;
}

void save_surface(const std::filesystem::path& path, const SurfaceGrid& grid) {
    write_text_file(path, surface_to_csv(grid));
}

} // namespace hjb
