#include "maple/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "maple/linalg.hpp"
#include "maple/rng.hpp"
#include "maple/solvers.hpp"

namespace maple {

GroundTruth gen_lowrank(std::size_t p, std::size_t r_star, double kappa, std::uint64_t seed) {
  if (r_star < 1 || r_star > p) throw std::invalid_argument("gen_lowrank: need 1 <= r* <= p");
  if (!(kappa >= 1.0)) throw std::invalid_argument("gen_lowrank: kappa must be >= 1");
  CounterRng rng = CounterRng(seed).split(0);
  const DenseMatrix u = qr_thin(gaussian_matrix(p, r_star, rng)).q;
  DenseMatrix ud = u;
  for (std::size_t i = 0; i < p; ++i) ud(i, 0) *= kappa;
  return {symmetrized(matmul_nt(ud, u)), r_star, kappa, seed};
}

std::vector<double> gen_nlarm(const GroundTruth& gt, const MeasurementOperator& op,
                              const LinkFunction& link, double noise_sigma, std::uint64_t seed) {
  if (noise_sigma < 0) throw std::invalid_argument("gen_nlarm: noise_sigma must be >= 0");
  auto y = op.apply(gt.l_star);
  CounterRng rng = CounterRng(seed).split(1);
  for (double& v : y) {
    v = link.g(v);
    if (noise_sigma > 0) v += noise_sigma * rng.normal();
  }
  return y;
}

DenseMatrix gen_lpca(const GroundTruth& gt, std::uint64_t seed) {
  CounterRng rng = CounterRng(seed).split(2);
  DenseMatrix y(gt.l_star.rows(), gt.l_star.cols());
  const auto l = gt.l_star.data();
  auto out = y.data();
  for (std::size_t k = 0; k < l.size(); ++k) out[k] = rng.uniform() < sigmoid(l[k]) ? 1.0 : 0.0;
  return y;
}

PmeInstance gen_pme(std::size_t p, std::size_t r_star, std::size_t n,
                    const PmeGenOptions& options, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_pme: n must be >= 1");
  PmeInstance inst;
  inst.s_bar = options.s_bar.empty() ? std::vector<double>(p, 2.0) : options.s_bar;
  if (inst.s_bar.size() != p) throw std::invalid_argument("gen_pme: S̄ length must equal p");
  for (double s : inst.s_bar) {
    if (!(s > 0.0)) throw std::invalid_argument("gen_pme: S̄ entries must be positive");
  }

  inst.truth = gen_lowrank(p, r_star, options.kappa, seed);
  if (options.spectral_fraction) {
    const double target = *options.spectral_fraction *
                          *std::min_element(inst.s_bar.begin(), inst.s_bar.end());
    inst.truth.l_star *= target / options.kappa;
  }

  DenseMatrix theta = inst.truth.l_star;
  for (std::size_t i = 0; i < p; ++i) theta(i, i) += inst.s_bar[i];
  const auto eig = sym_eig(theta);
  if (!(eig.values.back() > 0.0)) {
    throw std::domain_error("gen_pme: S̄ + L* is not positive definite");
  }

  // Σ = V diag(1/λ) Vᵀ and Σ^{1/2} = V diag(1/√λ) Vᵀ share the eigenbasis of Θ.
  DenseMatrix scaled = eig.vectors;
  DenseMatrix scaled_half = eig.vectors;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t k = 0; k < p; ++k) {
      scaled(i, k) /= eig.values[k];
      scaled_half(i, k) /= std::sqrt(eig.values[k]);
    }
  }
  inst.sigma = symmetrized(matmul_nt(scaled, eig.vectors));
  const DenseMatrix root = symmetrized(matmul_nt(scaled_half, eig.vectors));

  CounterRng rng = CounterRng(seed).split(3);
  inst.samples = matmul(gaussian_matrix(n, p, rng), root);
  inst.sample_cov = symmetrized(matmul_tn(inst.samples, inst.samples));
  inst.sample_cov *= 1.0 / static_cast<double>(n);
  return inst;
}

Metrics metrics(const DenseMatrix& estimate, const GroundTruth& gt, double threshold) {
  const double e = relative_error(estimate, gt.l_star);
  return {e, e < threshold};
}

void write_metadata_json(const std::filesystem::path& path, const InstanceMetadata& meta) {
  const nlohmann::ordered_json j = {{"seed", meta.seed},   {"p", meta.p},
                                    {"r_star", meta.r_star}, {"kappa", meta.kappa},
                                    {"n", meta.n},         {"sigma", meta.sigma}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

InstanceMetadata read_metadata_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const auto j = nlohmann::json::parse(in);
  InstanceMetadata meta;
  meta.seed = j.at("seed").get<std::uint64_t>();
  meta.p = j.at("p").get<std::size_t>();
  meta.r_star = j.at("r_star").get<std::size_t>();
  meta.kappa = j.at("kappa").get<double>();
  meta.n = j.at("n").get<std::size_t>();
  meta.sigma = j.at("sigma").get<double>();
  return meta;
}

}  // namespace maple
