#pragma once

#include "hjb/system.hpp"
#include "hjb/value_net.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hjb {

/// Axis-aligned square of the state plane sampled on a uniform mesh.
struct Domain {
    Eigen::Vector2d lower{-10.0, -10.0};
    Eigen::Vector2d upper{10.0, 10.0};
    int resolution = 500;

    /// Throws std::invalid_argument unless lower < upper and resolution >= 2.
    void validate() const;
    /// Mesh coordinate along `axis`; endpoints are exactly lower/upper.
    double coordinate(int axis, int index) const;
};

struct GridRecord {
    NetInput x = NetInput::Zero();
    double value = 0.0;
    NetInput costate = NetInput::Zero();
    double control = 0.0;
    bool is_boundary = false;
};

struct GridDataset {
    Domain domain;
    std::vector<GridRecord> records;
    std::vector<std::size_t> boundary_indices;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

/// Labels every mesh point with the system's analytic value, costate and
/// control. Records are row-major over the mesh (x1 index outer).
/// Requires a 2-state, 1-control system with an analytic solution.
GridDataset generate_grid_dataset(const AffineSystem& sys, const Domain& domain);

inline constexpr std::string_view kDatasetHeader =
    "x1,x2,J_star,lambda1_star,lambda2_star,u_star,is_boundary";

std::string dataset_to_csv(const GridDataset& dataset);
/// Parses records; `domain` is reconstructed from the record extents.
GridDataset dataset_from_csv(std::string_view text);

void save_dataset(const std::filesystem::path& path, const GridDataset& dataset);
GridDataset load_dataset(const std::filesystem::path& path);

} // namespace hjb
