#pragma once

// Classic-control environments with frozen dynamics. Each instance owns its
// generator; resets draw from it, and reset(seed) reseeds it.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sqrt_trust/rng.hpp"

namespace sqrt_trust::envs {

struct ActionSpace {
    bool discrete = true;
    std::size_t n = 0;                ///< number of discrete actions
    std::size_t dim = 0;              ///< continuous action dimension
    std::vector<double> low, high;    ///< continuous bounds

    /// Width of the flat action encoding (1 for discrete).
    std::size_t flat_dim() const { return discrete ? 1 : dim; }

    bool operator==(const ActionSpace&) const = default;
};

struct EnvSpec {
    std::string name;
    std::size_t observation_dim = 0;
    ActionSpace action_space;
    std::size_t max_episode_steps = 0;
    double reward_min = 0.0;
    double reward_max = 0.0;
    /// Nominal observation bounds, used to scale policy inputs.
    std::vector<double> observation_low, observation_high;
};

struct EnvState {
    std::vector<double> observation;
    bool terminal = false;
    bool truncated = false;
    std::size_t step_index = 0;

    bool done() const { return terminal || truncated; }
};

struct StepResult {
    EnvState state;
    double reward = 0.0;
};

/// Thrown when stepping an environment whose episode has ended.
class InvalidStateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class Env {
public:
    virtual ~Env() = default;

    virtual const EnvSpec& spec() const = 0;
    EnvState reset(std::optional<std::uint64_t> seed = std::nullopt);
    /// Continuous actions are clipped to the declared bounds; a discrete
    /// action is a one-element vector holding the index.
    StepResult step(std::span<const double> action);

    const EnvState& state() const { return state_; }

protected:
    virtual std::vector<double> reset_impl(Rng& rng) = 0;
    /// Advances dynamics; returns reward and sets `terminal`.
    virtual double step_impl(std::span<const double> action, bool& terminal, Rng& rng) = 0;

    std::size_t discrete_action(std::span<const double> action) const;

    Rng rng_{0};
    EnvState state_;
    bool started_ = false;
};

EnvSpec env_spec(std::string_view name);
std::unique_ptr<Env> make_env(std::string_view name);
std::vector<std::string> env_names();

class CartPole final : public Env {
public:
    static constexpr double kGravity = 9.8;
    static constexpr double kCartMass = 1.0;
    static constexpr double kPoleMass = 0.1;
    static constexpr double kTotalMass = kCartMass + kPoleMass;
    static constexpr double kHalfLength = 0.5;
    static constexpr double kPoleMassLength = kPoleMass * kHalfLength;
    static constexpr double kForceMag = 10.0;
    static constexpr double kTau = 0.02;
    static constexpr double kThetaThreshold = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
    static constexpr double kXThreshold = 2.4;

    CartPole();
    const EnvSpec& spec() const override { return spec_; }
    /// Overwrites the physical state (x, x_dot, theta, theta_dot) of a running episode.
    void set_physics(std::array<double, 4> physics);

private:
    std::vector<double> reset_impl(Rng& rng) override;
    double step_impl(std::span<const double> action, bool& terminal, Rng& rng) override;

    EnvSpec spec_;
    std::array<double, 4> physics_{};
};

class MountainCarContinuous final : public Env {
public:
    static constexpr double kMinPosition = -1.2;
    static constexpr double kMaxPosition = 0.6;
    static constexpr double kMaxSpeed = 0.07;
    static constexpr double kGoalPosition = 0.45;
    static constexpr double kGoalVelocity = 0.0;
    static constexpr double kPower = 0.0015;
    static constexpr double kGravityTerm = 0.0025;

    MountainCarContinuous();
    const EnvSpec& spec() const override { return spec_; }
    void set_physics(double position, double velocity);

private:
    std::vector<double> reset_impl(Rng& rng) override;
    double step_impl(std::span<const double> action, bool& terminal, Rng& rng) override;

    EnvSpec spec_;
    double position_ = 0.0;
    double velocity_ = 0.0;
};

/// 4x4 FrozenLake. Actions: 0 left, 1 down, 2 right, 3 up.
class FrozenLake final : public Env {
public:
    static constexpr std::size_t kSize = 4;
    static constexpr std::array<std::string_view, 4> kMap = {"SFFF", "FHFH", "FFFH", "HFFG"};

    /// `slip_probability` is the total probability of moving perpendicular
    /// to the intended direction (split evenly between the two sides).
    explicit FrozenLake(double slip_probability = 2.0 / 3.0);
    const EnvSpec& spec() const override { return spec_; }

    struct Outcome {
        std::size_t next_cell;
        double probability;
        double reward;
        bool terminal;
    };
    /// Transition kernel row for (cell, action); entries may repeat a cell.
    std::vector<Outcome> transitions(std::size_t cell, std::size_t action) const;

    std::size_t cell() const { return cell_; }
    static char tile(std::size_t cell) { return kMap[cell / kSize][cell % kSize]; }

private:
    std::vector<double> reset_impl(Rng& rng) override;
    double step_impl(std::span<const double> action, bool& terminal, Rng& rng) override;
    std::vector<double> one_hot() const;
    static std::size_t move(std::size_t cell, std::size_t direction);

    EnvSpec spec_;
    double slip_probability_;
    std::size_t cell_ = 0;
};

}  // namespace sqrt_trust::envs
