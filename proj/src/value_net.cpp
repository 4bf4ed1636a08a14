#include "hjb/value_net.hpp"

#include "hjb/csv.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hjb {

bool NetworkParams::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

NetworkParams& NetworkParams::operator+=(const NetworkParams& other) {
    for (std::size_t i = 0; i < kSize; ++i) {
        data_[i] += other.data_[i];
    }
    return *this;
}

NetworkParams& NetworkParams::operator*=(double s) {
    for (double& v : data_) {
        v *= s;
    }
    return *this;
}

double forward(const NetworkParams& params, const NetInput& x, ForwardTape& tape) {
    tape.x = x;
    tape.z1.noalias() = params.w1() * x;
    tape.z1 += params.b1();
    tape.a1 = tape.z1.array().tanh();
    tape.z2.noalias() = params.w2() * tape.a1;
    tape.z2 += params.b2();
    tape.a2 = tape.z2.array().tanh();
    tape.value = params.w3().dot(tape.a2) + params.b3();
    return tape.value;
}

NetInput costate(const NetworkParams& params, const ForwardTape& tape) {
    const Hidden d2 = (1.0 - tape.a2.array().square()).matrix();
    const Hidden d1 = (1.0 - tape.a1.array().square()).matrix();
    const Hidden g2 = d2.cwiseProduct(params.w3().transpose());
    const Hidden g1 = d1.cwiseProduct(params.w2().transpose() * g2);
    return params.w1().transpose() * g1;
}

void backward(const NetworkParams& params, const ForwardTape& tape, const Sensitivities& sens,
              NetworkParams& grad) {
    const double s = sens.d_value;
    const NetInput& c = sens.d_costate;

    const auto a1 = tape.a1.array();
    const auto a2 = tape.a2.array();
    const Hidden d1 = (1.0 - a1.square()).matrix();
    const Hidden d2 = (1.0 - a2.square()).matrix();

    // Tangent pass: c . grad_x J = W3 p2 with p2 = d2 * W2 (d1 * W1 c).
    const Hidden t1 = params.w1() * c;
    const Hidden p1 = d1.cwiseProduct(t1);
    const Hidden t2 = params.w2() * p1;
    const Hidden p2 = d2.cwiseProduct(t2);

    const Hidden w3t = params.w3().transpose();

    grad.w3() += (s * tape.a2 + p2).transpose();
    grad.b3() += s;

    // Sensitivity of the tangent t2, and total sensitivity of z2 (through the
    // value path and through d2 = 1 - tanh^2(z2) on the tangent path).
    const Hidden e2 = w3t.cwiseProduct(d2);
    const Hidden r2 = (w3t.array() * t2.array() * (-2.0 * a2 * d2.array())).matrix() + s * e2;

    grad.w2() += e2 * p1.transpose() + r2 * tape.a1.transpose();
    grad.b2() += r2;

    const Hidden bar_p1 = params.w2().transpose() * e2;
    const Hidden bar_a1 = params.w2().transpose() * r2;
    const Hidden e1 = bar_p1.cwiseProduct(d1);
    const Hidden r1 =
        (bar_p1.array() * t1.array() * (-2.0 * a1 * d1.array())).matrix() + bar_a1.cwiseProduct(d1);

    grad.w1() += e1 * c.transpose() + r1 * tape.x.transpose();
    grad.b1() += r1;
}

InitScheme parse_init_scheme(std::string_view name) {
    if (name == "glorot_uniform") {
        return InitScheme::GlorotUniform;
    }
    if (name == "zeros") {
        return InitScheme::Zeros;
    }
    throw std::invalid_argument("unknown init scheme: " + std::string(name));
}

std::string_view to_string(InitScheme scheme) {
    switch (scheme) {
    case InitScheme::GlorotUniform:
        return "glorot_uniform";
    case InitScheme::Zeros:
        return "zeros";
    }
    return "unknown";
}

NetworkParams init_params(std::uint64_t seed, InitScheme scheme) {
    NetworkParams params;
    if (scheme == InitScheme::Zeros) {
        return params;
    }
    std::mt19937_64 rng(seed);
    auto fill = [&rng](auto&& block, int fan_in, int fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index r = 0; r < block.rows(); ++r) {
            for (Eigen::Index c = 0; c < block.cols(); ++c) {
                block(r, c) = dist(rng);
            }
        }
    };
    fill(params.w1(), kInputDim, kHiddenWidth);
    fill(params.w2(), kHiddenWidth, kHiddenWidth);
    fill(params.w3(), kHiddenWidth, 1);
    return params;
}

namespace {

using nlohmann::json;

template <typename Block>
json block_to_json(const Block& block) {
    json out = json::array();
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
        for (Eigen::Index c = 0; c < block.cols(); ++c) {
            out.push_back(block(r, c));
        }
    }
    return out;
}

template <typename Block>
void block_from_json(const json& doc, const char* key, Block&& block) {
    const json& values = doc.at(key);
    if (!values.is_array() || values.size() != static_cast<std::size_t>(block.size())) {
        throw std::runtime_error(std::string("weight file: layer ") + key + " has wrong size");
    }
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
        for (Eigen::Index c = 0; c < block.cols(); ++c) {
            block(r, c) = values[k++].get<double>();
        }
    }
}

} // namespace

std::string weights_to_json(const WeightFile& file) {
    const NetworkParams& p = file.params;
    json doc;
    doc["format_version"] = kWeightFormatVersion;
    doc["architecture"] = {kInputDim, kHiddenWidth, kHiddenWidth, 1};
    doc["activation"] = "tanh";
    doc["seed"] = file.seed;
    doc["layers"] = {
        {"W1", block_to_json(p.w1())}, {"b1", block_to_json(p.b1())}, {"W2", block_to_json(p.w2())},
        {"b2", block_to_json(p.b2())}, {"W3", block_to_json(p.w3())}, {"b3", json::array({p.b3()})},
    };
    return doc.dump(2) + "\n";
}

WeightFile weights_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("weight file: ") + e.what());
    }
    if (doc.value("format_version", 0) != kWeightFormatVersion) {
        throw std::runtime_error("weight file: unsupported format_version");
    }
    if (doc.at("architecture") != json({kInputDim, kHiddenWidth, kHiddenWidth, 1})) {
        throw std::runtime_error("weight file: architecture must be [2,10,10,1]");
    }
    if (doc.at("activation") != "tanh") {
        throw std::runtime_error("weight file: activation must be tanh");
    }
    WeightFile file;
    file.seed = doc.at("seed").get<std::uint64_t>();
    const json& layers = doc.at("layers");
    NetworkParams& p = file.params;
    block_from_json(layers, "W1", p.w1());
    block_from_json(layers, "b1", p.b1());
    block_from_json(layers, "W2", p.w2());
    block_from_json(layers, "b2", p.b2());
    block_from_json(layers, "W3", p.w3());
    const json& b3 = layers.at("b3");
    if (!b3.is_array() || b3.size() != 1) {
        throw std::runtime_error("weight file: layer b3 has wrong size");
    }
    p.b3() = b3[0].get<double>();
    if (!p.all_finite()) {
        throw std::runtime_error("weight file: non-finite parameter");
    }
    return file;
}

void save_weights(const std::filesystem::path& path, const WeightFile& file) {
    write_text_file(path, weights_to_json(file));
}

WeightFile load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("missing weight file: " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return weights_from_json(buffer.str());
}

} // namespace hjb
