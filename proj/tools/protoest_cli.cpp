// protoest: command-line front end for world generation, transform fitting,
// episodic evaluation, bound sweeps, lemma checks and embedding diagnostics.
//
// Exit codes: 0 success, 2 input error, 3 parameter error, 4 sampling
// infeasible, 5 verification failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "protoest/datastore.hpp"
#include "protoest/io.hpp"
#include "protoest/protonet.hpp"
#include "protoest/theory.hpp"
#include "protoest/transforms.hpp"
#include "protoest/world.hpp"

namespace {

using namespace protoest;

constexpr int kExitInput = 2;
constexpr int kExitParameter = 3;
constexpr int kExitInfeasible = 4;
constexpr int kExitVerification = 5;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionTooLarge: return kExitParameter;
    case ErrorKind::InsufficientClasses:
    case ErrorKind::InsufficientSamplesPerClass: return kExitInfeasible;
    default: return kExitInput;
  }
}

std::filesystem::path manifest_path(const std::filesystem::path& out) {
  return out.string() + ".manifest.json";
}

std::vector<std::size_t> default_shots() { return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}; }

bool looks_like_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path.string());
  char c = 0;
  while (in.get(c)) {
    if (!std::isspace(static_cast<unsigned char>(c))) return c == '{';
  }
  return false;
}

// ---------------------------------------------------------------- gen-world

struct GenWorldArgs {
  Eigen::Index dim = 0;
  std::uint64_t seed = 0;
  std::string mu;
  std::string sigma_spec = "spherical:1";
  std::string sigma_c_spec = "spherical:1";
  std::size_t classes = 0;
  std::size_t points_per_class = 0;
  std::string out = "world.json";
  std::string csv_out = "embeddings.csv";
};

int run_gen_world(const GenWorldArgs& a) {
  if (a.dim < 1) throw Error(ErrorKind::InvalidArgument, "--dim must be at least 1");
  Vector mu = Vector::Zero(a.dim);
  if (!a.mu.empty()) {
    const auto values = parse_number_list(a.mu);
    if (static_cast<Eigen::Index>(values.size()) != a.dim) {
      throw Error(ErrorKind::InvalidArgument, "--mu needs " + std::to_string(a.dim) + " values");
    }
    mu = Eigen::Map<const Vector>(values.data(), a.dim);
  }
  GaussianWorld world(mu, parse_covariance_spec(a.sigma_spec, a.dim), parse_covariance_spec(a.sigma_c_spec, a.dim));
  write_json(a.out, world_to_json(world));

  json params{{"dim", a.dim},         {"sigma_spec", a.sigma_spec}, {"sigma_c_spec", a.sigma_c_spec},
              {"classes", a.classes}, {"points_per_class", a.points_per_class}, {"out", a.out}};
  if ((a.classes > 0) != (a.points_per_class > 0)) {
    throw Error(ErrorKind::InvalidArgument, "--classes and --points-per-class go together");
  }
  if (a.classes > 0) {
    const StreamKey root(a.seed);
    const auto classes = sample_classes(world, a.classes, root.child(0));
    const int width = static_cast<int>(std::to_string(a.classes - 1).size());
    std::ostringstream csv;
    for (const auto& cls : classes) {
      char label[32];
      std::snprintf(label, sizeof label, "class%0*llu", width, static_cast<unsigned long long>(cls.id));
      for (const auto& p : sample_points(cls, world, a.points_per_class, root.child(1))) {
        csv << label;
        for (Eigen::Index i = 0; i < p.size(); ++i) csv << ',' << format_double(p(i));
        csv << '\n';
      }
    }
    write_text(a.csv_out, csv.str());
    params["csv_out"] = a.csv_out;
  }
  write_json(manifest_path(a.out), run_manifest("gen-world", params, a.seed, json::object()));
  return 0;
}

// ---------------------------------------------------------------------- fit

struct FitArgs {
  std::string input;
  std::string method = "est";
  double rho = kDefaultRho;
  std::size_t dim = kDefaultOutDim;
  std::string weighting = "equal-class";
  std::string out = "transform.json";
};

int run_fit(const FitArgs& a) {
  const auto method = parse_transform_method(a.method);
  const auto weighting = parse_weighting(a.weighting);
  const auto dataset = load_embeddings(a.input);
  const std::string digest = file_digest(a.input);
  const auto stats = class_stats(dataset);

  LinearTransform t;
  json extra{{"dataset", {{"samples", dataset.size()}, {"classes", stats.classes.size()}}}};
  if (method == TransformMethod::EST) {
    const auto summary = moment_summary(stats, weighting);
    t = fit_est(summary, a.rho, a.dim);
    extra["weighting"] = std::string(to_string(weighting));
  } else {
    t = fit_pca(stats.pooled_cov, a.dim);
  }
  write_json(a.out, transform_to_json(t, digest, extra));

  json params{{"input", a.input}, {"method", a.method}, {"rho", a.rho},
              {"dim", a.dim},     {"weighting", a.weighting}, {"out", a.out}};
  write_json(manifest_path(a.out), run_manifest("fit", params, 0, json{{a.input, digest}}));
  if (t.negative_selected_count > 0) {
    std::cerr << "protoest: warning: " << t.negative_selected_count
              << " selected eigenvalue(s) are negative; consider a smaller --dim or --rho\n";
  }
  return 0;
}

// --------------------------------------------------------------------- eval

struct EvalArgs {
  std::string source;
  std::size_t ways = kDefaultWays;
  std::vector<std::size_t> shots = default_shots();
  std::size_t queries = kDefaultQueries;
  std::string query_mode = "per-class";
  std::size_t episodes = kDefaultEpisodes;
  std::string transform;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string model;
  std::string out = "eval";
};

int run_eval(const EvalArgs& a) {
  EvalConfig config;
  config.ways = a.ways;
  config.shots = a.shots;
  config.queries = a.queries;
  config.query_mode = parse_query_mode(a.query_mode);
  config.episodes = a.episodes;
  config.seed = a.seed;
  config.workers = a.workers;

  std::optional<LinearTransform> transform;
  json digests{{a.source, file_digest(a.source)}};
  if (!a.transform.empty()) {
    transform = read_transform(a.transform);
    digests[a.transform] = file_digest(a.transform);
  }
  const LinearTransform* tp = transform ? &*transform : nullptr;

  const bool world_source = looks_like_json(a.source);
  EvalReport report = world_source ? evaluate(config, read_world_config(a.source), tp)
                                   : evaluate(config, load_embeddings(a.source), tp);

  std::string model = a.model;
  if (model.empty()) {
    model = !transform ? "Vanilla ProtoNet"
                       : (transform->method == TransformMethod::EST ? "EST ProtoNet" : "PCA ProtoNet");
  }
  json meta{{"source_kind", world_source ? "world" : "embeddings"},
            {"transform", transform ? json(std::string(to_string(transform->method))) : json(nullptr)},
            {"model", model}};
  const std::string prefix = a.out;
  write_json(prefix + ".json", eval_report_to_json(report, meta));
  write_text(prefix + ".csv", eval_report_csv(report));
  write_text(prefix + ".table.csv", eval_report_table_csv(report, model));

  json params{{"source", a.source},     {"ways", a.ways},       {"shots", a.shots},
              {"queries", a.queries},   {"query_mode", a.query_mode}, {"episodes", a.episodes},
              {"transform", a.transform}, {"workers", a.workers}, {"out", a.out}};
  write_json(prefix + ".manifest.json", run_manifest("eval", params, a.seed, digests));
  return 0;
}

// -------------------------------------------------------------------- bound

struct BoundArgs {
  std::string world_config;
  std::string moments_from;
  std::size_t ways = 2;
  std::vector<std::size_t> shots = default_shots();
  std::size_t mc_episodes = 0;
  std::size_t queries = kDefaultQueries;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out;
};

int run_bound(const BoundArgs& a) {
  if (a.world_config.empty() == a.moments_from.empty()) {
    throw Error(ErrorKind::InvalidArgument, "give exactly one of --world-config or --moments-from");
  }
  std::optional<GaussianWorld> world;
  std::optional<EmbeddingDataset> dataset;
  TheoryInputs inputs;
  json digests = json::object();
  if (!a.world_config.empty()) {
    world = read_world_config(a.world_config);
    inputs = world_moments(*world);
    digests[a.world_config] = file_digest(a.world_config);
  } else {
    dataset = load_embeddings(a.moments_from);
    const auto stats = class_stats(*dataset);
    inputs = empirical_moments(moment_summary(stats, Weighting::EqualClass), stats);
    digests[a.moments_from] = file_digest(a.moments_from);
  }

  std::vector<BoundRow> rows;
  for (std::size_t k : a.shots) {
    BoundRow row{nway_bound(inputs, k, a.ways), std::nullopt};
    if (a.mc_episodes > 0) {
      if (world) {
        row.mc = mc_accuracy(*world, k, a.ways, a.mc_episodes, a.queries, a.seed, a.workers);
      } else {
        EvalConfig config;
        config.ways = a.ways;
        config.shots = {k};
        config.queries = a.queries;
        config.episodes = a.mc_episodes;
        config.seed = a.seed;
        config.workers = a.workers;
        const auto report = evaluate(config, *dataset);
        row.mc = AccuracyEstimate{report.per_shot.front().accuracy, report.per_shot.front().ci95};
      }
    }
    rows.push_back(row);
  }

  const std::string csv = bound_sweep_csv(rows);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    write_text(a.out + ".csv", csv);
    write_json(a.out + ".json", bound_sweep_to_json(rows, inputs));
    json params{{"world_config", a.world_config}, {"moments_from", a.moments_from}, {"ways", a.ways},
                {"shots", a.shots}, {"mc_episodes", a.mc_episodes}, {"queries", a.queries},
                {"workers", a.workers}, {"out", a.out}};
    write_json(a.out + ".manifest.json", run_manifest("bound", params, a.seed, digests));
  }
  return 0;
}

// ------------------------------------------------------------------- verify

struct VerifyArgs {
  std::string world_config;
  std::vector<std::size_t> ks{1, 2, 5, 10};
  std::size_t samples = 200000;
  std::size_t draws_per_pair = 8;
  std::uint64_t seed = 0;
  double perturb = 0.0;
  std::string out;
};

json check(const std::string& name, double closed_form, double estimate, double se, bool upper_bound_only) {
  // Floating slack keeps noiseless worlds (se == 0) from failing on rounding.
  const double slack = 4.0 * se + 1e-9 * std::max(1.0, std::abs(closed_form));
  const bool pass = upper_bound_only ? estimate <= closed_form + slack : std::abs(estimate - closed_form) <= slack;
  return json{{"check", name},     {"closed_form", closed_form}, {"monte_carlo", estimate},
              {"standard_error", se}, {"tolerance", slack},     {"pass", pass}};
}

int run_verify(const VerifyArgs& a) {
  const auto world = read_world_config(a.world_config);
  const TheoryInputs inputs = world_moments(world);
  const double scale = 1.0 + a.perturb;
  const StreamKey root(a.seed);
  const auto pair = sample_classes(world, 2, root.child(0));
  const std::pair<Vector, Vector> fixed{pair[0].mean, pair[1].mean};
  AlphaSampling sampling{a.samples, a.draws_per_pair};

  bool all_pass = true;
  json per_k = json::array();
  for (std::size_t k : a.ks) {
    const auto cond = mc_alpha_moments(world, k, fixed, root.child(1).child(k), sampling);
    const auto marg = mc_alpha_moments(world, k, std::nullopt, root.child(2).child(k), sampling);
    json checks = json::array();
    checks.push_back(check("lemma1_conditional", scale * lemma1_conditional(fixed.first, fixed.second),
                           cond.mean_conditional, cond.se_mean_conditional, false));
    checks.push_back(check("lemma1_marginal", scale * lemma1_marginal(inputs.tr_sigma), marg.mean_marginal,
                           marg.se_mean_marginal, false));
    checks.push_back(check("lemma2_domination", scale * lemma2_bound(k, world.class_cov(), world.mean_prior_cov()),
                           marg.var_conditional, marg.se_var_conditional, true));
    for (const auto& c : checks) all_pass = all_pass && c["pass"].get<bool>();
    per_k.push_back({{"k", k},
                     {"checks", checks},
                     {"samples", {{"conditional", cond.sample_count}, {"marginal", marg.sample_count},
                                  {"marginal_pairs", marg.pair_count}}}});
  }
  json report{{"world_config", a.world_config},
              {"seed", a.seed},
              {"samples", a.samples},
              {"draws_per_pair", a.draws_per_pair},
              {"perturb", a.perturb},
              {"per_k", per_k},
              {"all_pass", all_pass}};
  if (a.out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    write_json(a.out, report);
  }
  return all_pass ? 0 : kExitVerification;
}

// ----------------------------------------------------------------- diagnose

struct DiagnoseArgs {
  std::string input;
  double threshold = 0.9;
  std::string weighting = "equal-class";
  std::string out;
};

int run_diagnose(const DiagnoseArgs& a) {
  const auto dataset = load_embeddings(a.input);
  const auto stats = class_stats(dataset);
  const auto summary = moment_summary(stats, parse_weighting(a.weighting));
  const auto spectrum = sym_eigendecompose(summary.total_cov).values;
  json report{{"variance_ratio", variance_ratio(summary)},
              {"intrinsic_dimension", intrinsic_dimension_from_spectrum(spectrum, a.threshold)},
              {"threshold", a.threshold},
              {"eigenvalues", vector_to_json(spectrum)},
              {"class_count", summary.class_count},
              {"sample_count", summary.sample_count},
              {"weighting", a.weighting},
              {"conventions",
               {{"covariance", "biased (1/n) about the pooled mean"},
                {"spectrum", "eigenvalues of the pooled covariance; negatives clamped to 0 for r_d"}}}};
  if (a.out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    write_json(a.out, report);
  }
  return 0;
}

// ----------------------------------------------------------------------- vc

struct VcArgs {
  std::size_t vc_dim = 0;
  std::size_t k = 0;
  double delta = 0.05;
};

int run_vc(const VcArgs& a) {
  std::printf("%.10f\n", vc_gap(a.vc_dim, a.k, a.delta));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prototype-classifier theory, embedding transforms and episodic evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  GenWorldArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-world", "Write a Gaussian world config and optionally sample embeddings");
  gen_cmd->add_option("--dim", gen.dim, "Embedding dimension")->required();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->required();
  gen_cmd->add_option("--mu", gen.mu, "Class-mean prior center as v1,...,vE (default zeros)");
  gen_cmd->add_option("--sigma-spec", gen.sigma_spec, "Class-mean prior covariance: spherical:<v>|diag:<..>|file:<path>")
      ->capture_default_str();
  gen_cmd->add_option("--sigma-c-spec", gen.sigma_c_spec, "Within-class covariance spec")->capture_default_str();
  gen_cmd->add_option("--classes", gen.classes, "Classes to sample into the CSV");
  gen_cmd->add_option("--points-per-class", gen.points_per_class, "Points per sampled class");
  gen_cmd->add_option("--out", gen.out, "World config path")->capture_default_str();
  gen_cmd->add_option("--csv-out", gen.csv_out, "Sampled embedding CSV path")->capture_default_str();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit an EST or PCA transform on an embedding CSV");
  fit_cmd->add_option("--input", fit.input, "Embedding CSV")->required();
  fit_cmd->add_option("--method", fit.method, "est or pca")->capture_default_str();
  fit_cmd->add_option("--rho", fit.rho, "Within-class penalty weight")->capture_default_str();
  fit_cmd->add_option("--dim", fit.dim, "Output dimension d")->capture_default_str();
  fit_cmd->add_option("--weighting", fit.weighting, "equal-class or class-size")->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "Transform JSON path")->capture_default_str();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Episodic N-way k-shot evaluation");
  eval_cmd->add_option("--source", ev.source, "World config JSON or embedding CSV")->required();
  eval_cmd->add_option("--ways", ev.ways)->capture_default_str();
  eval_cmd->add_option("--shots", ev.shots, "Comma-separated shot values")->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--queries", ev.queries)->capture_default_str();
  eval_cmd->add_option("--query-mode", ev.query_mode, "per-class or per-episode")->capture_default_str();
  eval_cmd->add_option("--episodes", ev.episodes)->capture_default_str();
  eval_cmd->add_option("--transform", ev.transform, "Transform JSON applied before classification");
  eval_cmd->add_option("--seed", ev.seed)->capture_default_str();
  eval_cmd->add_option("--workers", ev.workers, "Threads; never changes results")->capture_default_str();
  eval_cmd->add_option("--model", ev.model, "Row label for the table output");
  eval_cmd->add_option("--out", ev.out, "Output prefix for .json/.csv/.table.csv")->capture_default_str();

  BoundArgs bd;
  auto* bound_cmd = app.add_subcommand("bound", "Accuracy lower bound sweep over k");
  bound_cmd->add_option("--world-config", bd.world_config);
  bound_cmd->add_option("--moments-from", bd.moments_from, "Embedding CSV to estimate moments from");
  bound_cmd->add_option("--ways", bd.ways)->capture_default_str();
  bound_cmd->add_option("--shots", bd.shots)->delimiter(',')->capture_default_str();
  bound_cmd->add_option("--mc-episodes", bd.mc_episodes, "Also estimate accuracy with this many episodes");
  bound_cmd->add_option("--queries", bd.queries)->capture_default_str();
  bound_cmd->add_option("--seed", bd.seed)->capture_default_str();
  bound_cmd->add_option("--workers", bd.workers)->capture_default_str();
  bound_cmd->add_option("--out", bd.out, "Output prefix (CSV to stdout when omitted)");

  VerifyArgs vf;
  auto* verify_cmd = app.add_subcommand("verify", "Monte Carlo check of the alpha mean and variance results");
  verify_cmd->add_option("--world-config", vf.world_config)->required();
  verify_cmd->add_option("--k", vf.ks)->delimiter(',')->capture_default_str();
  verify_cmd->add_option("--samples", vf.samples)->capture_default_str();
  verify_cmd->add_option("--draws-per-pair", vf.draws_per_pair)->capture_default_str();
  verify_cmd->add_option("--seed", vf.seed)->capture_default_str();
  verify_cmd->add_option("--perturb", vf.perturb, "Scale closed forms by (1 + perturb); negative control");
  verify_cmd->add_option("--out", vf.out, "Report path (stdout when omitted)");

  DiagnoseArgs dg;
  auto* diag_cmd = app.add_subcommand("diagnose", "Variance ratio, intrinsic dimension and spectrum");
  diag_cmd->add_option("--input", dg.input)->required();
  diag_cmd->add_option("--threshold", dg.threshold)->capture_default_str();
  diag_cmd->add_option("--weighting", dg.weighting)->capture_default_str();
  diag_cmd->add_option("--out", dg.out, "Report path (stdout when omitted)");

  VcArgs vc;
  auto* vc_cmd = app.add_subcommand("vc", "VC generalization gap");
  vc_cmd->add_option("--vc-dim", vc.vc_dim)->required();
  vc_cmd->add_option("--k", vc.k)->required();
  vc_cmd->add_option("--delta", vc.delta)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*gen_cmd) return run_gen_world(gen);
    if (*fit_cmd) return run_fit(fit);
    if (*eval_cmd) return run_eval(ev);
    if (*bound_cmd) return run_bound(bd);
    if (*verify_cmd) {
      if (vf.samples < 1000) throw Error(ErrorKind::InvalidArgument, "--samples must be at least 1000");
      return run_verify(vf);
    }
    if (*diag_cmd) return run_diagnose(dg);
    if (*vc_cmd) return run_vc(vc);
  } catch (const Error& e) {
    std::cerr << "protoest: error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "protoest: error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
