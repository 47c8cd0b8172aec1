#include "sev/noise.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace sev {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& c, std::array<std::uint32_t, 2>& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
    const std::array<std::uint32_t, 4> next = {
        static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
        static_cast<std::uint32_t>(p1),
        static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
        static_cast<std::uint32_t>(p0),
    };
    c = next;
    k[0] += kPhiloxW0;
    k[1] += kPhiloxW1;
}

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// One standard normal per counter: words 0/1 of the block form the uniform.
inline double counter_normal(std::uint64_t key, std::uint32_t c0, std::uint32_t c1, std::uint32_t c2,
                             std::uint32_t c3) {
    const auto block = philox4x32(key, {c0, c1, c2, c3});
    const std::uint64_t bits = (static_cast<std::uint64_t>(block[0]) << 32) | block[1];
    return inverse_normal_cdf(uniform_from_bits(bits));
}

// All increments of a noise family live on a power-of-two lattice about 2^-30
// below the level-0 increment scale. Lattice members of every refinement
// level sum exactly in doubles, which is what makes the bridge identity
// "fine pair sums to the coarse increment" hold bitwise; a free-floating
// midpoint draw cannot achieve that once the bridge offset dominates the
// increment. The ~1e-9 relative quantization is far below every statistical
// tolerance used on these paths.
constexpr int kLatticeBits = 30;
constexpr int kMaxRefineLevels = 20;

inline double level_quantum(double base_dt, int level) {
    return std::ldexp(1.0, std::ilogb(std::sqrt(base_dt)) - kLatticeBits - level);
}

inline double snap(double value, double quantum) {
    return quantum * std::nearbyint(value / quantum);
}

void put_u64_le(std::ofstream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64_le(std::ifstream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

} // namespace

std::array<std::uint32_t, 4> philox4x32(std::uint64_t key, const std::array<std::uint32_t, 4>& counter) {
    std::array<std::uint32_t, 4> c = counter;
    std::array<std::uint32_t, 2> k = {static_cast<std::uint32_t>(key),
                                      static_cast<std::uint32_t>(key >> 32)};
    for (int round = 0; round < 10; ++round) philox_round(c, k);
    return c;
}

double uniform_from_bits(std::uint64_t bits) {
    // 53 significant bits, offset half a grid cell: values lie in (0,1) strictly.
    return static_cast<double>(bits >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

std::uint64_t derive_path_seed(std::uint64_t seed, std::uint64_t path_index) {
    return splitmix64(seed + 0x9E3779B97F4A7C15ull * (path_index + 1));
}

std::uint64_t CounterRng::next_u64() {
    const auto block =
        philox4x32(key_, {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                          0x436e7452u, 0u});
    ++counter_;
    return (static_cast<std::uint64_t>(block[0]) << 32) | block[1];
}

double inverse_normal_cdf(double p) {
    // Wichura (1988), algorithm AS 241, PPND16.
    if (!(p > 0.0 && p < 1.0)) throw InputError("inverse_normal_cdf: p must lie in (0,1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                                 6.7265770927008700853e4) *
                                    r +
                                4.5921953931549871457e4) *
                                   r +
                               1.3731693765509461125e4) *
                                  r +
                              1.9715909503065514427e3) *
                                 r +
                             1.3314166789178437745e2) *
                                r +
                            3.3871328727963666080e0);
        const double den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                                 3.9307895800092710610e4) *
                                    r +
                                2.1213794301586595867e4) *
                                   r +
                               5.3941960214247511077e3) *
                                  r +
                              6.8718700749205790830e2) *
                                 r +
                             4.2313330701600911252e1) *
                                r +
                            1.0);
        return q * num / den;
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        const double num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                                 2.41780725177450611770e-1) *
                                    r +
                                1.27045825245236838258e0) *
                                   r +
                               3.64784832476320460504e0) *
                                  r +
                              5.76949722146069140550e0) *
                                 r +
                             4.63033784615654529590e0) *
                                r +
                            1.42343711074968357734e0);
        const double den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                                 1.51986665636164571966e-2) *
                                    r +
                                1.48103976427480074590e-1) *
                                   r +
                               6.89767334985100004550e-1) *
                                  r +
                              1.67638483018380384940e0) *
                                 r +
                             2.05319162663775882187e0) *
                                r +
                            1.0);
        x = num / den;
    } else {
        r -= 5.0;
        const double num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                                 1.24266094738807843860e-3) *
                                    r +
                                2.65321895265761230930e-2) *
                                   r +
                               2.96560571828504891230e-1) *
                                  r +
                              1.78482653991729133580e0) *
                                 r +
                             5.46378491116411436990e0) *
                                r +
                            6.65790464350110377720e0);
        const double den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                                 1.84631831751005468180e-5) *
                                    r +
                                7.86869131145613259100e-4) *
                                   r +
                               1.48753612908506148525e-2) *
                                  r +
                              1.36929880922735805310e-1) *
                                 r +
                             5.99832206555887937690e-1) *
                                r +
                            1.0);
        x = num / den;
    }
    return q < 0.0 ? -x : x;
}

NoisePath NoisePath::sample(std::uint64_t seed, double dt, std::size_t steps, std::size_t modes) {
    if (!(dt > 0.0)) throw InputError("NoisePath: dt must be positive");
    if (steps < 1) throw InputError("NoisePath: steps must be >= 1");
    if (modes < 1) throw InputError("NoisePath: modes must be >= 1");
    NoisePath path;
    path.seed = seed;
    path.dt = dt;
    path.steps = steps;
    path.modes = modes;
    path.level = 0;
    path.base_steps = steps;
    path.increments.resize(steps * modes);
    const double sd = std::sqrt(dt);
    const double quantum = level_quantum(dt, 0);
    for (std::size_t k = 0; k < steps; ++k)
        for (std::size_t j = 0; j < modes; ++j)
            path.inc(k, j) = snap(sd * counter_normal(seed, 0u, static_cast<std::uint32_t>(k),
                                                      static_cast<std::uint32_t>(j), 0u),
                                  quantum);
    return path;
}

NoisePath NoisePath::refined() const {
    if (level + 1 > kMaxRefineLevels)
        throw InputError("NoisePath::refined: refinement depth exceeds the exact-lattice range");
    NoisePath fine;
    fine.seed = seed;
    fine.dt = dt * 0.5;
    fine.steps = steps * 2;
    fine.modes = modes;
    fine.level = level + 1;
    fine.base_steps = base_steps;
    fine.increments.resize(fine.steps * modes);
    // Midpoint value conditioned on the coarse increment d over [t, t+dt]:
    // W_mid - W_left = d/2 + Z with Z ~ N(0, dt/4). The counter encodes
    // (new level, coarse interval, mode). Snapping Z to the next lattice
    // level keeps left, right and d on a common grid, so left + right == d
    // holds exactly in double arithmetic.
    const double base_dt = std::ldexp(dt, level);
    const double quantum = level_quantum(base_dt, fine.level);
    const double half_sd = 0.5 * std::sqrt(dt);
    for (std::size_t k = 0; k < steps; ++k) {
        for (std::size_t j = 0; j < modes; ++j) {
            const double d = inc(k, j);
            const double z =
                snap(half_sd * counter_normal(seed, static_cast<std::uint32_t>(fine.level),
                                              static_cast<std::uint32_t>(k),
                                              static_cast<std::uint32_t>(j), 0u),
                     quantum);
            const double left = 0.5 * d + z;
            const double right = 0.5 * d - z;
            fine.inc(2 * k, j) = left;
            fine.inc(2 * k + 1, j) = right;
        }
    }
    return fine;
}

void NoisePath::write_binary(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("NoisePath::write_binary: cannot open " + path);
    put_u64_le(out, seed);
    put_u64_le(out, steps);
    put_u64_le(out, modes);
    put_u64_le(out, std::bit_cast<std::uint64_t>(dt));
    for (double v : increments) put_u64_le(out, std::bit_cast<std::uint64_t>(v));
    if (!out) throw InputError("NoisePath::write_binary: write failed for " + path);
}

NoisePath NoisePath::read_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("NoisePath::read_binary: cannot open " + path);
    NoisePath p;
    p.seed = get_u64_le(in);
    p.steps = get_u64_le(in);
    p.modes = get_u64_le(in);
    p.dt = std::bit_cast<double>(get_u64_le(in));
    p.level = 0;
    p.base_steps = p.steps;
    p.increments.resize(p.steps * p.modes);
    for (double& v : p.increments) v = std::bit_cast<double>(get_u64_le(in));
    if (!in) throw InputError("NoisePath::read_binary: truncated file " + path);
    return p;
}

Vec apply_hs(const Mat& B, std::span<const double> dW) {
    if (dW.size() != B.cols) throw InputError("apply_hs: mode count mismatch");
    return matvec(B, dW);
}

} // namespace sev
