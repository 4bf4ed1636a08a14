#include "hjb/dataset.hpp"

#include "hjb/csv.hpp"

#include <cmath>
#include <stdexcept>

namespace hjb {

void Domain::validate() const {
    if (!(lower.array() < upper.array()).all()) {
        throw std::invalid_argument("domain: lower must be < upper componentwise");
    }
    if (resolution < 2) {
        throw std::invalid_argument("domain: resolution must be >= 2");
    }
}

double Domain::coordinate(int axis, int index) const {
    if (index == 0) {
        return lower[axis];
    }
    if (index == resolution - 1) {
        return upper[axis];
    }
    const double frac = static_cast<double>(index) / static_cast<double>(resolution - 1);
    return lower[axis] + (upper[axis] - lower[axis]) * frac;
}

GridDataset generate_grid_dataset(const AffineSystem& sys, const Domain& domain) {
    domain.validate();
    if (sys.state_dim() != 2 || sys.control_dim() != 1) {
        throw std::invalid_argument("grid dataset requires a 2-state, 1-control system");
    }
    if (!sys.has_analytic()) {
        throw std::invalid_argument("grid dataset requires an analytic solution for " + sys.name());
    }
    GridDataset dataset;
    dataset.domain = domain;
    const int res = domain.resolution;
    dataset.records.reserve(static_cast<std::size_t>(res) * res);
    for (int i = 0; i < res; ++i) {
        for (int j = 0; j < res; ++j) {
            GridRecord rec;
            rec.x = {domain.coordinate(0, i), domain.coordinate(1, j)};
            const Vec x = rec.x;
            rec.value = sys.analytic_value(x);
            rec.costate = sys.analytic_costate(x);
            rec.control = sys.analytic_control(x)[0];
            rec.is_boundary = i == 0 || j == 0 || i == res - 1 || j == res - 1;
            if (rec.is_boundary) {
                dataset.boundary_indices.push_back(dataset.records.size());
            }
            dataset.records.push_back(rec);
        }
    }
    return dataset;
}

std::string dataset_to_csv(const GridDataset& dataset) {
    std::string out;
    out.reserve(dataset.size() * 96 + 64);
    out += kDatasetHeader;
    out += '\n';
    for (const GridRecord& r : dataset.records) {
        out += format_double(r.x[0]);
        out += ',';
        out += format_double(r.x[1]);
        out += ',';
        out += format_double(r.value);
        out += ',';
        out += format_double(r.costate[0]);
        out += ',';
        out += format_double(r.costate[1]);
        out += ',';
        out += format_double(r.control);
        out += ',';
        out += r.is_boundary ? '1' : '0';
        out += '\n';
    }
    return out;
}

GridDataset dataset_from_csv(std::string_view text) {
    GridDataset dataset;
    std::size_t pos = 0;
    bool header = true;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty()) {
            continue;
        }
        if (header) {
            if (line != kDatasetHeader) {
                throw std::runtime_error("dataset: unexpected header");
            }
            header = false;
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != 7) {
            throw std::runtime_error("dataset: line " + std::to_string(line_no) + " has " +
                                     std::to_string(fields.size()) + " fields");
        }
        GridRecord rec;
        rec.x = {parse_double(fields[0]), parse_double(fields[1])};
        rec.value = parse_double(fields[2]);
        rec.costate = {parse_double(fields[3]), parse_double(fields[4])};
        rec.control = parse_double(fields[5]);
        rec.is_boundary = fields[6] == "1";
        if (rec.is_boundary) {
            dataset.boundary_indices.push_back(dataset.records.size());
        }
        dataset.records.push_back(rec);
    }
    if (header) {
        throw std::runtime_error("dataset: missing header");
    }
    if (!dataset.records.empty()) {
        Eigen::Vector2d lo = dataset.records.front().x;
        Eigen::Vector2d hi = lo;
        for (const GridRecord& r : dataset.records) {
            lo = lo.cwiseMin(r.x);
            hi = hi.cwiseMax(r.x);
        }
        dataset.domain.lower = lo;
        dataset.domain.upper = hi;
        dataset.domain.resolution =
            static_cast<int>(std::lround(std::sqrt(static_cast<double>(dataset.records.size()))));
    }
    return dataset;
}

void save_dataset(const std::filesystem::path& path, const GridDataset& dataset) {
    write_text_file(path, dataset_to_csv(dataset));
}

GridDataset load_dataset(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error("missing dataset: " + path.string());
    }
    return dataset_from_csv(read_text_file(path));
}

} // namespace hjb
