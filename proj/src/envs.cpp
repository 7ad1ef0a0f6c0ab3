#include "sqrt_trust/envs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sqrt_trust::envs {

EnvState Env::reset(std::optional<std::uint64_t> seed) {
    if (seed) rng_ = Rng(*seed, Stream::env);
    state_ = EnvState{reset_impl(rng_), false, false, 0};
    started_ = true;
    return state_;
}

StepResult Env::step(std::span<const double> action) {
    if (!started_) throw InvalidStateError("step() before reset()");
    if (state_.done()) throw InvalidStateError("step() after the episode ended; call reset()");
    if (action.size() != spec().action_space.flat_dim())
        throw std::invalid_argument("action has the wrong dimension for " + spec().name);

    std::vector<double> clipped(action.begin(), action.end());
    const auto& space = spec().action_space;
    if (!space.discrete)
        for (std::size_t i = 0; i < clipped.size(); ++i)
            clipped[i] = std::clamp(clipped[i], space.low[i], space.high[i]);

    bool terminal = false;
    const double reward = step_impl(clipped, terminal, rng_);
    ++state_.step_index;
    state_.terminal = terminal;
    state_.truncated = !terminal && state_.step_index >= spec().max_episode_steps;
    return {state_, reward};
}

std::size_t Env::discrete_action(std::span<const double> action) const {
    const double raw = action[0];
    const auto n = spec().action_space.n;
    if (!(raw >= 0.0) || raw != std::floor(raw) || raw >= static_cast<double>(n))
        throw std::invalid_argument("discrete action out of range for " + spec().name);
    return static_cast<std::size_t>(raw);
}

// ---------------------------------------------------------------------------
// CartPole

CartPole::CartPole() {
    spec_.name = "cartpole";
    spec_.observation_dim = 4;
    spec_.action_space = {true, 2, 0, {}, {}};
    spec_.max_episode_steps = 500;
    spec_.reward_min = 0.0;
    spec_.reward_max = 500.0;
    spec_.observation_low = {-kXThreshold, -3.0, -kThetaThreshold, -3.5};
    spec_.observation_high = {kXThreshold, 3.0, kThetaThreshold, 3.5};
}

void CartPole::set_physics(std::array<double, 4> physics) {
    physics_ = physics;
    state_.observation.assign(physics.begin(), physics.end());
}

std::vector<double> CartPole::reset_impl(Rng& rng) {
    for (double& v : physics_) v = rng.uniform(-0.05, 0.05);
    return {physics_.begin(), physics_.end()};
}

double CartPole::step_impl(std::span<const double> action, bool& terminal, Rng&) {
    auto& [x, x_dot, theta, theta_dot] = physics_;
    const double force = discrete_action(action) == 1 ? kForceMag : -kForceMag;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double temp = (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
    const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                             (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / kTotalMass));
    const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

    // Explicit Euler: positions use the old velocities.
    x += kTau * x_dot;
    x_dot += kTau * x_acc;
    theta += kTau * theta_dot;
    theta_dot += kTau * theta_acc;

    state_.observation.assign(physics_.begin(), physics_.end());
    terminal = x < -kXThreshold || x > kXThreshold || theta < -kThetaThreshold || theta > kThetaThreshold;
    return 1.0;
}

// ---------------------------------------------------------------------------
// MountainCarContinuous

MountainCarContinuous::MountainCarContinuous() {
    spec_.name = "mountaincar_continuous";
    spec_.observation_dim = 2;
    spec_.action_space = {false, 0, 1, {-1.0}, {1.0}};
    spec_.max_episode_steps = 999;
    spec_.reward_min = -99.9;
    spec_.reward_max = 100.0;
    spec_.observation_low = {kMinPosition, -kMaxSpeed};
    spec_.observation_high = {kMaxPosition, kMaxSpeed};
}

void MountainCarContinuous::set_physics(double position, double velocity) {
    position_ = position;
    velocity_ = velocity;
    state_.observation = {position_, velocity_};
}

std::vector<double> MountainCarContinuous::reset_impl(Rng& rng) {
    position_ = rng.uniform(-0.6, -0.4);
    velocity_ = 0.0;
    return {position_, velocity_};
}

double MountainCarContinuous::step_impl(std::span<const double> action, bool& terminal, Rng&) {
    const double force = action[0];
    velocity_ += force * kPower - kGravityTerm * std::cos(3.0 * position_);
    velocity_ = std::clamp(velocity_, -kMaxSpeed, kMaxSpeed);
    position_ += velocity_;
    position_ = std::clamp(position_, kMinPosition, kMaxPosition);
    if (position_ == kMinPosition && velocity_ < 0.0) velocity_ = 0.0;

    state_.observation = {position_, velocity_};
    terminal = position_ >= kGoalPosition && velocity_ >= kGoalVelocity;
    double reward = -0.1 * force * force;
    if (terminal) reward += 100.0;
    return reward;
}

// ---------------------------------------------------------------------------
// FrozenLake

FrozenLake::FrozenLake(double slip_probability) : slip_probability_(slip_probability) {
    if (!(slip_probability >= 0.0 && slip_probability <= 1.0))
        throw std::invalid_argument("FrozenLake slip probability must lie in [0, 1]");
    spec_.name = "frozenlake";
    spec_.observation_dim = kSize * kSize;
    spec_.action_space = {true, 4, 0, {}, {}};
    spec_.max_episode_steps = 100;
    spec_.reward_min = 0.0;
    spec_.reward_max = 1.0;
    spec_.observation_low.assign(kSize * kSize, 0.0);
    spec_.observation_high.assign(kSize * kSize, 1.0);
}

std::size_t FrozenLake::move(std::size_t cell, std::size_t direction) {
    std::size_t row = cell / kSize;
    std::size_t col = cell % kSize;
    switch (direction) {
        case 0: col = col > 0 ? col - 1 : 0; break;
        case 1: row = std::min(row + 1, kSize - 1); break;
        case 2: col = std::min(col + 1, kSize - 1); break;
        case 3: row = row > 0 ? row - 1 : 0; break;
        default: throw std::invalid_argument("FrozenLake: bad direction");
    }
    return row * kSize + col;
}

std::vector<FrozenLake::Outcome> FrozenLake::transitions(std::size_t cell, std::size_t action) const {
    if (cell >= kSize * kSize || action >= 4) throw std::invalid_argument("FrozenLake::transitions: out of range");
    const char here = tile(cell);
    if (here == 'H' || here == 'G') return {{cell, 1.0, 0.0, true}};

    auto outcome = [](std::size_t next, double p) {
        const char t = tile(next);
        return Outcome{next, p, t == 'G' ? 1.0 : 0.0, t == 'G' || t == 'H'};
    };
    const double side = 0.5 * slip_probability_;
    return {outcome(move(cell, (action + 3) % 4), side),
            outcome(move(cell, action), 1.0 - slip_probability_),
            outcome(move(cell, (action + 1) % 4), side)};
}

std::vector<double> FrozenLake::one_hot() const {
    std::vector<double> obs(kSize * kSize, 0.0);
    obs[cell_] = 1.0;
    return obs;
}

std::vector<double> FrozenLake::reset_impl(Rng&) {
    cell_ = 0;
    return one_hot();
}

double FrozenLake::step_impl(std::span<const double> action, bool& terminal, Rng& rng) {
    const auto row = transitions(cell_, discrete_action(action));
    // One uniform draw per step keeps the stream aligned even without slip.
    const double u = rng.uniform();
    double cumulative = 0.0;
    const Outcome* chosen = &row.back();
    for (const auto& o : row) {
        cumulative += o.probability;
        if (u < cumulative) {
            chosen = &o;
            break;
        }
    }
    cell_ = chosen->next_cell;
    state_.observation = one_hot();
    terminal = chosen->terminal;
    return chosen->reward;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Env> make_env(std::string_view name) {
    if (name == "cartpole") return std::make_unique<CartPole>();
    if (name == "mountaincar_continuous") return std::make_unique<MountainCarContinuous>();
    if (name == "frozenlake") return std::make_unique<FrozenLake>();
    throw std::invalid_argument("unknown environment: " + std::string(name));
}

EnvSpec env_spec(std::string_view name) { return make_env(name)->spec(); }

std::vector<std::string> env_names() { return {"cartpole", "mountaincar_continuous", "frozenlake"}; }

}  // namespace sqrt_trust::envs
