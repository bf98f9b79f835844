#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ahocda/tensor.hpp"

namespace ahocda::hopfield {

/// Modern continuous Hopfield memory with query/key/value projections.
///
/// Shapes: memory M is M_N x C_l (one stored pattern per row), W_q and W_k
/// are C_l x C_s and project a C_l vector v to v^T W (length C_s). W_v is
/// C_l x C_l and maps a stored pattern m to W_v m so the retrieved feature
/// keeps the classifier's input width.
struct HopfieldMemory {
    Matrix memory;
    Matrix w_q;
    Matrix w_k;
    Matrix w_v;
    double tau = 1.0;
    bool frozen = false;

    int num_patterns() const { return memory.rows; }
    int feature_dim() const { return memory.cols; }
    int projection_dim() const { return w_q.cols; }

    /// Freezes M, W_k and W_v. W_q stays trainable. Idempotent.
    void freeze() { frozen = true; }

    friend bool operator==(const HopfieldMemory&, const HopfieldMemory&) = default;
};

/// Seeded uniform(-g/sqrt(fan_in), g/sqrt(fan_in)) init of all four matrices,
/// fan_in = C_l, g = init_gain.
HopfieldMemory make_memory(int num_patterns, int feature_dim, int projection_dim, double tau, std::uint64_t seed,
                           double init_gain = 1.0);

/// Throws ParameterError for inconsistent shapes, tau <= 0 or C_s > C_l.
void validate(const HopfieldMemory& mem);

/// Functional form of HopfieldMemory::freeze.
HopfieldMemory freeze(HopfieldMemory mem);

/// softmax_i(tau * (W_q^T z) . (W_k^T m_i)), max-subtracted.
std::vector<double> similarity(const HopfieldMemory& mem, std::span<const double> z);

/// sum_j sim_j * W_v m_j.
std::vector<double> retrieve(const HopfieldMemory& mem, std::span<const double> z);

/// Per-row forward state kept for the backward pass.
struct BatchCache {
    Matrix z;       // P x C_l input rows
    Matrix query;   // P x C_s
    Matrix keys;    // M_N x C_s
    Matrix values;  // M_N x C_l
    Matrix sim;     // P x M_N
};

/// Retrieval for every row of z (P x C_l). Fills the cache when given.
Matrix retrieve_batch(const HopfieldMemory& mem, const Matrix& z, BatchCache* cache = nullptr);

/// Gradients of a scalar loss with respect to the input rows and every
/// parameter. Frozen parameters come back as exact zeros.
struct Gradients {
    Matrix d_z;
    Matrix d_memory;
    Matrix d_w_q;
    Matrix d_w_k;
    Matrix d_w_v;
};

Gradients backward_batch(const HopfieldMemory& mem, const BatchCache& cache, const Matrix& upstream);

/// Single-vector convenience wrapper around forward + backward_batch.
Gradients hopfield_backward(const HopfieldMemory& mem, std::span<const double> z, std::span<const double> upstream);

struct IterateResult {
    std::vector<double> state;
    int iterations = 0;
    bool converged = false;
};

/// Classic projection-free update z <- M^T softmax(tau * M z), repeated until
/// successive states differ by less than tol in max-norm or max_iters updates
/// have been applied.
IterateResult mchn_iterate(const HopfieldMemory& mem, std::span<const double> query, int max_iters, double tol);

/// Checkpoint: one line of JSON {M_N, C_l, C_s, tau, frozen} then row-major
/// little-endian f64 arrays in the order M, W_q, W_k, W_v.
void save(const HopfieldMemory& mem, const std::filesystem::path& path);
HopfieldMemory load(const std::filesystem::path& path);

}  // namespace ahocda::hopfield
