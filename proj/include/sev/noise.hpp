#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "sev/linalg.hpp"

namespace sev {

/// Philox4x32-10 keyed counter block (Salmon et al. 2011). Pure function of
/// (key, counter), so streams are reproducible bit for bit on any platform.
std::array<std::uint32_t, 4> philox4x32(std::uint64_t key, const std::array<std::uint32_t, 4>& counter);

/// Inverse of the standard normal CDF, Wichura's PPND16 (AS 241).
/// Absolute error below 1e-15 on (0,1); pure rational arithmetic.
double inverse_normal_cdf(double p);

/// Map 64 random bits to a uniform in the open interval (0,1).
double uniform_from_bits(std::uint64_t bits);

/// SplitMix64-style derivation of a per-path key from the experiment seed.
/// Path i uses key split(seed, i); this is the documented splitting rule.
std::uint64_t derive_path_seed(std::uint64_t seed, std::uint64_t path_index);

/// Small deterministic stream of uniforms/normals on top of philox4x32,
/// for samplers that need ad-hoc draws (assumption checkers etc.).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}
    std::uint64_t next_u64();
    double next_uniform() { return uniform_from_bits(next_u64()); }
    double next_normal() { return inverse_normal_cdf(next_uniform()); }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Grid of Wiener increments for an m-mode truncation of the cylindrical
/// process: steps x modes entries, each N(0, dt), independent.
///
/// Increments are indexed by counters, never by draw order, so a path is a
/// pure function of (seed, level, step, mode). refined() halves dt by
/// Brownian-bridge midpoint subdivision: the two fine increments of every
/// coarse interval sum to the coarse increment bitwise, which is what couples
/// dt-refinement studies to a single noise realization. Bitwise exactness is
/// achieved by snapping all draws to a shared power-of-two lattice ~2^-30
/// below the increment scale (see noise.cpp); refinement depth is capped
/// where the lattice would run out of integer headroom.
class NoisePath {
public:
    std::uint64_t seed = 0;
    double dt = 0.0;
    std::size_t steps = 0;
    std::size_t modes = 0;
    int level = 0;             // refinement depth below the level-0 grid
    std::size_t base_steps = 0; // steps at level 0
    std::vector<double> increments; // row-major steps x modes

    static NoisePath sample(std::uint64_t seed, double dt, std::size_t steps, std::size_t modes);

    NoisePath refined() const;

    double inc(std::size_t k, std::size_t j) const { return increments[k * modes + j]; }
    double& inc(std::size_t k, std::size_t j) { return increments[k * modes + j]; }

    void write_binary(const std::string& path) const;
    static NoisePath read_binary(const std::string& path);
};

/// Apply an n x m Hilbert–Schmidt coordinate matrix to a noise increment.
Vec apply_hs(const Mat& B, std::span<const double> dW);

} // namespace sev
