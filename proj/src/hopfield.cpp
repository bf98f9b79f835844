#include "ahocda/hopfield.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ahocda/blob.hpp"
#include "ahocda/error.hpp"
#include "ahocda/linalg.hpp"
#include "ahocda/rng.hpp"

namespace ahocda::hopfield {

using linalg::view;

namespace {

void fill_uniform(Matrix& m, int fan_in, double gain, Rng& rng) {
    const double bound = gain / std::sqrt(static_cast<double>(fan_in));
    for (double& v : m.data) v = rng.uniform(-bound, bound);
}

void check_vector(const HopfieldMemory& mem, std::span<const double> z) {
    if (static_cast<int>(z.size()) != mem.feature_dim()) {
        throw InvalidInput("feature vector has length " + std::to_string(z.size()) + ", memory expects " +
                           std::to_string(mem.feature_dim()));
    }
    for (double v : z) {
        if (!std::isfinite(v)) throw InvalidInput("feature vector contains a non-finite value");
    }
}

// Numerically stable in-place softmax over each row.
void softmax_rows(linalg::MatMap m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        const double mx = row.maxCoeff();
        row = (row.array() - mx).unaryExpr(&linalg::softmax_exp);
        row /= row.sum();
    }
}

Matrix as_row(std::span<const double> v) {
    Matrix m(1, static_cast<int>(v.size()));
    std::copy(v.begin(), v.end(), m.data.begin());
    return m;
}

}  // namespace

HopfieldMemory make_memory(int num_patterns, int feature_dim, int projection_dim, double tau, std::uint64_t seed,
                           double init_gain) {
    HopfieldMemory mem;
    mem.memory = Matrix(num_patterns, feature_dim);
    mem.w_q = Matrix(feature_dim, projection_dim);
    mem.w_k = Matrix(feature_dim, projection_dim);
    mem.w_v = Matrix(feature_dim, feature_dim);
    mem.tau = tau;
    validate(mem);
    Rng rng(seed);
    fill_uniform(mem.memory, feature_dim, init_gain, rng);
    fill_uniform(mem.w_q, feature_dim, init_gain, rng);
    fill_uniform(mem.w_k, feature_dim, init_gain, rng);
    fill_uniform(mem.w_v, feature_dim, init_gain, rng);
    return mem;
}

void validate(const HopfieldMemory& mem) {
    const int n = mem.memory.rows, cl = mem.memory.cols, cs = mem.w_q.cols;
    if (n < 1 || cl < 1 || cs < 1) throw ParameterError("memory dimensions must be positive");
    if (cs > cl) throw ParameterError("projection dimension C_s must not exceed feature dimension C_l");
    if (mem.w_q.rows != cl || mem.w_k.rows != cl || mem.w_k.cols != cs || mem.w_v.rows != cl || mem.w_v.cols != cl) {
        throw ParameterError("projection matrix shapes are inconsistent with the memory");
    }
    if (!(mem.tau > 0.0) || !std::isfinite(mem.tau)) throw ParameterError("tau must be positive and finite");
}

HopfieldMemory freeze(HopfieldMemory mem) {
    mem.freeze();
    return mem;
}

Matrix retrieve_batch(const HopfieldMemory& mem, const Matrix& z, BatchCache* cache) {
    if (z.cols != mem.feature_dim()) throw InvalidInput("feature rows do not match memory width");
    BatchCache local;
    BatchCache& c = cache ? *cache : local;
    c.z = z;
    c.query = Matrix(z.rows, mem.projection_dim());
    c.keys = Matrix(mem.num_patterns(), mem.projection_dim());
    c.values = Matrix(mem.num_patterns(), mem.feature_dim());
    c.sim = Matrix(z.rows, mem.num_patterns());

    view(c.query).noalias() = view(z) * view(mem.w_q);
    view(c.keys).noalias() = view(mem.memory) * view(mem.w_k);
    view(c.values).noalias() = view(mem.memory) * view(mem.w_v).transpose();
    view(c.sim).noalias() = mem.tau * (view(c.query) * view(c.keys).transpose());
    softmax_rows(view(c.sim));

    Matrix out(z.rows, mem.feature_dim());
    view(out).noalias() = view(c.sim) * view(c.values);
    return out;
}

std::vector<double> similarity(const HopfieldMemory& mem, std::span<const double> z) {
    check_vector(mem, z);
    BatchCache c;
    retrieve_batch(mem, as_row(z), &c);
    return c.sim.data;
}

std::vector<double> retrieve(const HopfieldMemory& mem, std::span<const double> z) {
    check_vector(mem, z);
    return retrieve_batch(mem, as_row(z)).data;
}

Gradients backward_batch(const HopfieldMemory& mem, const BatchCache& c, const Matrix& upstream) {
    const int p = c.z.rows;
    const int n = mem.num_patterns();
    Gradients g;
    g.d_z = Matrix(p, mem.feature_dim());
    g.d_memory = Matrix(n, mem.feature_dim());
    g.d_w_q = Matrix(mem.feature_dim(), mem.projection_dim());
    g.d_w_k = Matrix(mem.feature_dim(), mem.projection_dim());
    g.d_w_v = Matrix(mem.feature_dim(), mem.feature_dim());

    const auto up = view(upstream);
    const auto sim = view(c.sim);
    linalg::RowMat d_sim = up * view(c.values).transpose();
    // Softmax Jacobian: d_logit = s * (d_s - <d_s, s>).
    Eigen::VectorXd inner = (d_sim.array() * sim.array()).rowwise().sum();
    linalg::RowMat d_logits = sim.array() * (d_sim.colwise() - inner).array();
    linalg::RowMat d_query = mem.tau * (d_logits * view(c.keys));

    view(g.d_z).noalias() = d_query * view(mem.w_q).transpose();
    view(g.d_w_q).noalias() = view(c.z).transpose() * d_query;

    if (!mem.frozen) {
        linalg::RowMat d_keys = mem.tau * (d_logits.transpose() * view(c.query));
        linalg::RowMat d_values = sim.transpose() * up;
        view(g.d_w_k).noalias() = view(mem.memory).transpose() * d_keys;
        view(g.d_w_v).noalias() = d_values.transpose() * view(mem.memory);
        view(g.d_memory).noalias() = d_keys * view(mem.w_k).transpose();
        view(g.d_memory).noalias() += d_values * view(mem.w_v);
    }
    return g;
}

Gradients hopfield_backward(const HopfieldMemory& mem, std::span<const double> z, std::span<const double> upstream) {
    check_vector(mem, z);
    if (static_cast<int>(upstream.size()) != mem.feature_dim()) throw InvalidInput("upstream gradient has wrong length");
    BatchCache c;
    retrieve_batch(mem, as_row(z), &c);
    return backward_batch(mem, c, as_row(upstream));
}

IterateResult mchn_iterate(const HopfieldMemory& mem, std::span<const double> query, int max_iters, double tol) {
    check_vector(mem, query);
    if (max_iters < 1) throw ParameterError("max_iters must be at least 1");
    if (!(tol > 0.0)) throw ParameterError("tol must be positive");
    const auto m = view(mem.memory);
    Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(query.data(), static_cast<Eigen::Index>(query.size()));
    IterateResult result;
    for (int it = 1; it <= max_iters; ++it) {
        Eigen::VectorXd logits = mem.tau * (m * z);
        logits = (logits.array() - logits.maxCoeff()).unaryExpr(&linalg::softmax_exp);
        logits /= logits.sum();
        Eigen::VectorXd next = m.transpose() * logits;
        const double step = (next - z).cwiseAbs().maxCoeff();
        z = std::move(next);
        result.iterations = it;
        if (step < tol) {
            result.converged = true;
            break;
        }
    }
    result.state.assign(z.data(), z.data() + z.size());
    return result;
}

void save(const HopfieldMemory& mem, const std::filesystem::path& path) {
    validate(mem);
    nlohmann::json header = {{"M_N", mem.num_patterns()},
                             {"C_l", mem.feature_dim()},
                             {"C_s", mem.projection_dim()},
                             {"tau", mem.tau},
                             {"frozen", mem.frozen}};
    const std::span<const double> arrays[] = {mem.memory.data, mem.w_q.data, mem.w_k.data, mem.w_v.data};
    blob::write(path, header, arrays);
}

HopfieldMemory load(const std::filesystem::path& path) {
    blob::Blob b = blob::read(path);
    HopfieldMemory mem;
    try {
        const int n = b.header.at("M_N"), cl = b.header.at("C_l"), cs = b.header.at("C_s");
        mem.memory = Matrix(n, cl);
        mem.w_q = Matrix(cl, cs);
        mem.w_k = Matrix(cl, cs);
        mem.w_v = Matrix(cl, cl);
        mem.tau = b.header.at("tau");
        mem.frozen = b.header.at("frozen");
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad memory checkpoint header in " + path.string() + ": " + e.what());
    }
    validate(mem);
    blob::PayloadReader r(b.payload);
    r.take(mem.memory.data);
    r.take(mem.w_q.data);
    r.take(mem.w_k.data);
    r.take(mem.w_v.data);
    if (!r.exhausted()) throw IoError("memory checkpoint has trailing data: " + path.string());
    return mem;
}

}  // namespace ahocda::hopfield
