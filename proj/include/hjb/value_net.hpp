#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace hjb {

inline constexpr int kInputDim = 2;
inline constexpr int kHiddenWidth = 10;

using NetInput = Eigen::Vector2d;
using Hidden = Eigen::Matrix<double, kHiddenWidth, 1>;

/// Parameters of the fixed 2-10-10-1 tanh value network.
///
/// Storage is one contiguous block so optimizers can treat the parameters as
/// a flat vector; the layer accessors are row-major views into that block.
/// The same type doubles as a gradient accumulator.
class NetworkParams {
public:
    using Layer1 = Eigen::Matrix<double, kHiddenWidth, kInputDim, Eigen::RowMajor>;
    using Layer2 = Eigen::Matrix<double, kHiddenWidth, kHiddenWidth, Eigen::RowMajor>;
    using Layer3 = Eigen::Matrix<double, 1, kHiddenWidth, Eigen::RowMajor>;

    static constexpr std::size_t kW1Offset = 0;
    static constexpr std::size_t kB1Offset = kW1Offset + kHiddenWidth * kInputDim;
    static constexpr std::size_t kW2Offset = kB1Offset + kHiddenWidth;
    static constexpr std::size_t kB2Offset = kW2Offset + kHiddenWidth * kHiddenWidth;
    static constexpr std::size_t kW3Offset = kB2Offset + kHiddenWidth;
    static constexpr std::size_t kB3Offset = kW3Offset + kHiddenWidth;
    static constexpr std::size_t kSize = kB3Offset + 1;

    NetworkParams() { data_.fill(0.0); }

    Eigen::Map<Layer1> w1() { return Eigen::Map<Layer1>(data_.data() + kW1Offset); }
    Eigen::Map<const Layer1> w1() const { return Eigen::Map<const Layer1>(data_.data() + kW1Offset); }
    Eigen::Map<Hidden> b1() { return Eigen::Map<Hidden>(data_.data() + kB1Offset); }
    Eigen::Map<const Hidden> b1() const { return Eigen::Map<const Hidden>(data_.data() + kB1Offset); }
    Eigen::Map<Layer2> w2() { return Eigen::Map<Layer2>(data_.data() + kW2Offset); }
    Eigen::Map<const Layer2> w2() const { return Eigen::Map<const Layer2>(data_.data() + kW2Offset); }
    Eigen::Map<Hidden> b2() { return Eigen::Map<Hidden>(data_.data() + kB2Offset); }
    Eigen::Map<const Hidden> b2() const { return Eigen::Map<const Hidden>(data_.data() + kB2Offset); }
    Eigen::Map<Layer3> w3() { return Eigen::Map<Layer3>(data_.data() + kW3Offset); }
    Eigen::Map<const Layer3> w3() const { return Eigen::Map<const Layer3>(data_.data() + kW3Offset); }
    double& b3() { return data_[kB3Offset]; }
    double b3() const { return data_[kB3Offset]; }

    std::span<double, kSize> flat() { return data_; }
    std::span<const double, kSize> flat() const { return data_; }

    void set_zero() { data_.fill(0.0); }
    bool all_finite() const;

    NetworkParams& operator+=(const NetworkParams& other);
    NetworkParams& operator*=(double s);

    friend bool operator==(const NetworkParams&, const NetworkParams&) = default;

private:
    std::array<double, kSize> data_;
};

/// Intermediates of one forward pass; a_i = tanh(z_i).
struct ForwardTape {
    NetInput x = NetInput::Zero();
    Hidden z1 = Hidden::Zero();
    Hidden a1 = Hidden::Zero();
    Hidden z2 = Hidden::Zero();
    Hidden a2 = Hidden::Zero();
    double value = 0.0;
};

/// Upstream sensitivities of a per-sample loss with respect to the network
/// output and to its input gradient (the costate).
struct Sensitivities {
    double d_value = 0.0;
    NetInput d_costate = NetInput::Zero();
};

double forward(const NetworkParams& params, const NetInput& x, ForwardTape& tape);

inline double forward(const NetworkParams& params, const NetInput& x) {
    ForwardTape tape;
    return forward(params, x, tape);
}

/// Input gradient of the network output at the taped point.
NetInput costate(const NetworkParams& params, const ForwardTape& tape);

/// Accumulates dL/dtheta into `grad` for
///   L = sens.d_value * J(x; theta) + sens.d_costate . grad_x J(x; theta).
///
/// The costate term is differentiated through the layered costate formula,
/// which brings in tanh'' = -2 tanh (1 - tanh^2) of the recorded activations.
void backward(const NetworkParams& params, const ForwardTape& tape, const Sensitivities& sens,
              NetworkParams& grad);

enum class InitScheme { GlorotUniform, Zeros };

InitScheme parse_init_scheme(std::string_view name);
std::string_view to_string(InitScheme scheme);

NetworkParams init_params(std::uint64_t seed, InitScheme scheme = InitScheme::GlorotUniform);

/// Weight file document (JSON).
struct WeightFile {
    NetworkParams params;
    std::uint64_t seed = 0;
};

inline constexpr int kWeightFormatVersion = 1;

std::string weights_to_json(const WeightFile& file);
WeightFile weights_from_json(std::string_view text);
void save_weights(const std::filesystem::path& path, const WeightFile& file);
WeightFile load_weights(const std::filesystem::path& path);

} // namespace hjb
