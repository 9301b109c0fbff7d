// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Run with --pilot to print the raw EST-vs-identity margin used to pin criterion 5.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "protoest/io.hpp"

using namespace protoest;
namespace fs = std::filesystem;

namespace {

// Smallest EST-minus-identity 1-shot accuracy gap accepted in criterion 5.
// Pilot run (600 episodes, 5-way): EST 1.0000 +- 0, identity 0.3485 +- 0.0067, gap 0.6515.
// The floor sits below the pilot gap to absorb seed-to-seed noise.
constexpr double kEstMarginFloor = 0.5;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

Matrix random_psd(std::mt19937_64& gen, Eigen::Index n) {
  std::normal_distribution<double> nd;
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = nd(gen);
  return a * a.transpose() / static_cast<double>(n);
}

// The five seeded worlds shared by criteria 2 and 3.
std::vector<GaussianWorld> world_grid() {
  std::mt19937_64 gen(2024);
  std::vector<GaussianWorld> worlds;
  for (Eigen::Index dim : {2, 4, 8, 2, 4}) {
    Matrix sigma = random_psd(gen, dim);
    Matrix sigma_c = random_psd(gen, dim);
    worlds.emplace_back(Vector::Zero(dim), std::move(sigma), std::move(sigma_c));
  }
  return worlds;
}

const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "protoest_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + PROTOEST_CLI + "\" " + args + " > /dev/null 2> \"" +
                          (workdir() / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

// ------------------------------------------------------------------ criteria

Outcome lemma1_check() {
  Outcome o;
  const GaussianWorld world(Vector::Zero(4), Matrix::Identity(4, 4), Matrix::Identity(4, 4));
  const auto pair = sample_classes(world, 2, StreamKey(1));
  const auto cond = mc_alpha_moments(world, 1, std::make_pair(pair[0].mean, pair[1].mean), StreamKey(2));
  const double closed = lemma1_conditional(pair[0].mean, pair[1].mean);
  const double z_cond = std::abs(cond.mean_conditional - closed) / cond.se_mean_conditional;
  o.require(z_cond <= 4.0, "conditional mean outside 4 SE");

  const auto marg = mc_alpha_moments(world, 1, std::nullopt, StreamKey(3));
  const double z_marg = std::abs(marg.mean_marginal - lemma1_marginal(4.0)) / marg.se_mean_marginal;
  o.require(z_marg <= 4.0, "marginal mean outside 4 SE");
  o.detail << "conditional " << cond.mean_conditional << " vs " << closed << " (z=" << z_cond << "), marginal "
           << marg.mean_marginal << " vs 8 (z=" << z_marg << "), " << cond.sample_count << " draws each";
  return o;
}

Outcome lemma2_check() {
  Outcome o;
  const auto worlds = world_grid();
  int cells = 0, passed = 0;
  double worst = -1e300;
  for (std::size_t w = 0; w < worlds.size(); ++w) {
    for (std::size_t k : {1, 2, 5, 10}) {
      const auto m = mc_alpha_moments(worlds[w], k, std::nullopt, StreamKey(100 + w).child(k));
      const double bound = lemma2_bound(k, worlds[w].class_cov(), worlds[w].mean_prior_cov());
      ++cells;
      if (m.var_conditional <= bound + 4.0 * m.se_var_conditional) ++passed;
      worst = std::max(worst, m.var_conditional / bound);
    }
  }
  o.require(passed == cells, "Monte Carlo variance above bound + 4 SE");
  o.detail << passed << "/" << cells << " cells dominated; largest MC/bound ratio " << worst;
  return o;
}

Outcome theorem1_check() {
  Outcome o;
  const auto worlds = world_grid();
  int cells = 0, passed = 0;
  double tightest = 1e300;
  for (std::size_t w = 0; w < worlds.size(); ++w) {
    const auto in = world_moments(worlds[w]);
    double previous = -1.0;
    for (std::size_t k = 1; k <= 10; ++k) {
      const auto b = nway_bound(in, k, 2);
      const auto acc = mc_accuracy(worlds[w], k, 2, 5000, 15, 300 + w, 4);
      ++cells;
      if (acc.accuracy >= b.clamped - 3.0 * acc.ci95) ++passed;
      tightest = std::min(tightest, acc.accuracy - b.clamped);
      o.require(b.raw >= previous, "bound decreased in k");
      previous = b.raw;
    }
    const auto at = [&](std::size_t k) { return theorem1_bound(in, k).raw; };
    if (in.tr_sigma_c_sq > 0.0) o.require(at(2) - at(1) > at(10) - at(5), "saturation gap");
  }
  o.require(passed == cells, "accuracy below bound - 3 ci95");

  const GaussianWorld spot(Vector::Zero(2), Matrix::Identity(2, 2), 1e-6 * Matrix::Identity(2, 2));
  const auto spot_in = world_moments(spot);
  const auto fourth = mc_fourth_moment(spot, 1000000, StreamKey(7));
  o.require(std::abs(fourth.mean - spot_in.fourth_moment) <= 4.0 * fourth.standard_error,
            "fourth moment cross-check");
  double spot_worst = 0.0;
  for (std::size_t k = 1; k <= 10; ++k)
    spot_worst = std::max(spot_worst, std::abs(theorem1_bound(spot_in, k).raw - 0.5));
  o.require(spot_worst <= 1e-3, "spot value 0.5");
  o.detail << passed << "/" << cells << " cells dominated (smallest accuracy - bound " << tightest
           << "); spot bound within " << spot_worst << " of 0.5; MC fourth moment " << fourth.mean << " vs "
           << spot_in.fourth_moment;
  return o;
}

Outcome linear_equivalence_check() {
  Outcome o;
  Stream s = StreamKey(4).stream();
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vector q = s.normal_vector(5), a = s.normal_vector(5), b = s.normal_vector(5);
    worst = std::max(worst, std::abs(alpha_pair(q, a, b, AlphaForm::Distance) - alpha_pair(q, a, b, AlphaForm::Linear)));
  }
  o.require(worst <= 1e-9, "distance and linear forms differ");
  o.detail << "max |difference| over 10000 triples " << worst;
  return o;
}

struct EstComparison {
  double angle = 0.0;
  AccuracyEstimate est, identity;
};

EstComparison est_comparison() {
  Vector prior = Vector::Zero(10), noise = Vector::Ones(10);
  prior.head(2).setOnes();
  noise.head(2).setZero();
  const GaussianWorld world(Vector::Zero(10), prior.asDiagonal(), noise.asDiagonal());

  // Training split: 200 classes x 500 points drawn from the world.
  const auto classes = sample_classes(world, 200, StreamKey(50));
  EmbeddingDataset train;
  train.vectors.resize(200 * 500, 10);
  Eigen::Index r = 0;
  for (const auto& c : classes) {
    for (const auto& p : sample_points(c, world, 500, StreamKey(51))) {
      train.vectors.row(r++) = p.transpose();
      train.labels.push_back("c" + std::to_string(c.id));
    }
  }
  const auto t = fit_est(moment_summary(class_stats(train)), 1.0, 2);
  Matrix truth = Matrix::Zero(10, 2);
  truth(0, 0) = truth(1, 1) = 1.0;
  Eigen::JacobiSVD<Matrix> svd(t.projection.transpose() * truth);
  EstComparison out;
  out.angle = std::acos(std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0)) * 180.0 / M_PI;

  EvalConfig config;
  config.shots = {1};
  config.workers = 4;
  const auto with = evaluate(config, world, &t);
  const auto without = evaluate(config, world);
  out.est = {with.per_shot[0].accuracy, with.per_shot[0].ci95};
  out.identity = {without.per_shot[0].accuracy, without.per_shot[0].ci95};
  return out;
}

Outcome est_recovery_check() {
  Outcome o;
  const auto c = est_comparison();
  const double margin = c.est.accuracy - c.identity.accuracy;
  o.require(c.angle < 5.0, "principal angle");
  o.require(margin > c.est.ci95 + c.identity.ci95, "margin within CIs");
  o.require(margin >= kEstMarginFloor, "margin below pinned floor");
  o.detail << "angle " << c.angle << " deg; 1-shot 5-way EST " << c.est.accuracy << " +- " << c.est.ci95
           << " vs identity " << c.identity.accuracy << " +- " << c.identity.ci95 << " (margin " << margin
           << ", floor " << kEstMarginFloor << ")";
  return o;
}

Outcome est_pca_check() {
  Outcome o;
  std::mt19937_64 gen(6);
  std::normal_distribution<double> nd;
  Matrix rows(240, 7);
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    for (Eigen::Index j = 0; j < rows.cols(); ++j) rows(i, j) = nd(gen) + (i % 12) * 0.3 * (j + 1);
  std::vector<std::string> labels;
  for (int i = 0; i < 240; ++i) labels.push_back("k" + std::to_string(i % 12));
  const auto stats = class_stats(EmbeddingDataset{labels, rows});
  Matrix means(static_cast<Eigen::Index>(stats.classes.size()), 7);
  for (std::size_t c = 0; c < stats.classes.size(); ++c)
    means.row(static_cast<Eigen::Index>(c)) = stats.classes[c].mean.transpose();
  const auto est = fit_est(moment_summary(stats), 0.0, 7);
  const auto pca = fit_pca(covariance(means), 7);
  const double eig_gap = (est.selected_eigenvalues - pca.selected_eigenvalues).cwiseAbs().maxCoeff();
  o.require(eig_gap <= 1e-8, "eigenvalue sequences differ");

  const auto t = fit_est(moment_summary(stats), 0.5, 3);
  const Matrix supports = rows.topRows(9);
  const double commute = (prototype(apply_rows(t, supports)) - apply(t, prototype(supports))).cwiseAbs().maxCoeff();
  o.require(commute <= 1e-10, "prototype/transform commutation");
  o.detail << "eigenvalue gap " << eig_gap << ", commutation gap " << commute;
  return o;
}

Outcome diagnostics_check() {
  Outcome o;
  // Balanced +-1 factorial on three orthogonal directions of R^6.
  Matrix rows(48, 6);
  std::vector<std::string> labels;
  for (int i = 0; i < 48; ++i) {
    const double a = i & 1 ? 1 : -1, b = i & 2 ? 1 : -1, c = i & 4 ? 1 : -1;
    rows.row(i) << a, a, b, b, c, c;
    labels.push_back("c" + std::to_string(i % 3));
  }
  const auto stats = class_stats(EmbeddingDataset{labels, rows});
  const std::size_t dim = intrinsic_dimension(stats.pooled_cov, 0.9);
  o.require(dim == 3, "intrinsic dimension");

  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd;
  const std::vector<int> sizes{3, 10, 25, 7, 60};
  EmbeddingDataset unbalanced;
  unbalanced.vectors.resize(105, 4);
  Eigen::Index r = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    for (int i = 0; i < sizes[c]; ++i, ++r) {
      for (Eigen::Index j = 0; j < 4; ++j) unbalanced.vectors(r, j) = nd(gen) + 2.0 * static_cast<double>(c) * (j + 1);
      unbalanced.labels.push_back("u" + std::to_string(c));
    }
  }
  const auto s = moment_summary(class_stats(unbalanced), Weighting::ClassSize);
  const double total = s.total_cov.trace();
  const double rel = std::abs(total - s.within_cov.trace() - s.between_cov.trace()) / total;
  o.require(rel <= 1e-9, "law of total variance");
  o.detail << "rank-3 intrinsic dimension " << dim << "; total-variance identity relative error " << rel;
  return o;
}

Outcome vc_check() {
  Outcome o;
  const double v = vc_gap(2, 2, 0.05);
  o.require(std::abs(v - 1.513) <= 1e-3, "vc_gap(2,2,0.05)");
  bool dec = true, inc = true;
  for (std::size_t k = 2; k < 1000; ++k) dec = dec && vc_gap(2, k + 1, 0.05) < vc_gap(2, k, 0.05);
  for (std::size_t d = 1; d < 64; ++d) inc = inc && vc_gap(d + 1, 100, 0.05) > vc_gap(d, 100, 0.05);
  o.require(dec, "decreasing in k");
  o.require(inc, "increasing in D");
  o.detail << "vc_gap(2,2,0.05) = " << v;
  return o;
}

Outcome determinism_check() {
  Outcome o;
  const auto world = workdir() / "det_world.json";
  o.require(run_cli("gen-world --dim 6 --sigma-c-spec spherical:2 --seed 3 --out " + quoted(world)) == 0,
            "gen-world");
  std::string reference;
  int runs = 0;
  for (int workers : {1, 4, 8, 1, 4, 8}) {
    const auto prefix = workdir() / ("det_" + std::to_string(runs++));
    o.require(run_cli("eval --source " + quoted(world) + " --seed 17 --workers " + std::to_string(workers) +
                      " --out " + quoted(prefix)) == 0,
              "eval");
    const std::string csv = slurp(prefix.string() + ".csv");
    if (reference.empty()) reference = csv;
    o.require(!csv.empty() && csv == reference, "CSV differs for workers=" + std::to_string(workers));
  }
  o.detail << runs << " runs (workers 1,4,8 twice) byte-identical, " << reference.size() << " bytes";
  return o;
}

Outcome protocol_check() {
  Outcome o;
  const auto world = workdir() / "proto_world.json";
  const auto prefix = workdir() / "proto";
  o.require(run_cli("gen-world --dim 8 --seed 5 --out " + quoted(world)) == 0, "gen-world");
  o.require(run_cli("eval --source " + quoted(world) + " --out " + quoted(prefix)) == 0, "eval");
  const json j = read_json(prefix.string() + ".json");
  const auto& per_k = j.at("per_k");
  o.require(per_k.size() == 10, "ten shot values");
  for (std::size_t i = 0; i < per_k.size(); ++i) {
    o.require(per_k[i].at("k") == i + 1, "shot order");
    o.require(per_k[i].at("episodes") == 600, "600 episodes");
  }
  o.require(j.at("config").at("ways") == 5 && j.at("config").at("queries") == 15, "5-way, 15 queries");
  const std::string table = slurp(prefix.string() + ".table.csv");
  const std::string header = table.substr(0, table.find('\n'));
  o.require(header == "model,1,2,3,4,5,6,7,8,9,10,average,average_ci95", "table header");
  o.require(std::count(table.begin(), table.end(), '\n') == 2, "one model row");
  o.detail << "table header '" << header << "'";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1 && std::string(argv[1]) == "--pilot") {
    const auto c = est_comparison();
    std::printf("angle %.4f deg\nest %.4f +- %.4f\nidentity %.4f +- %.4f\nmargin %.4f, ci sum %.4f\n", c.angle,
                c.est.accuracy, c.est.ci95, c.identity.accuracy, c.identity.ci95,
                c.est.accuracy - c.identity.accuracy, c.est.ci95 + c.identity.ci95);
    return 0;
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 alpha mean closed forms", lemma1_check},
      {"2 alpha variance domination", lemma2_check},
      {"3 accuracy bound validity", theorem1_check},
      {"4 distance/linear equivalence", linear_equivalence_check},
      {"5 EST subspace recovery", est_recovery_check},
      {"6 EST/PCA consistency", est_pca_check},
      {"7 diagnostics", diagnostics_check},
      {"8 VC gap", vc_check},
      {"9 determinism", determinism_check},
      {"10 protocol fidelity", protocol_check},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  criterion %-34s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), secs,
                o.detail.str().c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
