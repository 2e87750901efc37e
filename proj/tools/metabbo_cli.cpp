// Command-line driver for the meta-learned black-box optimization toolkit:
// meta-dataset generation, autoencoder training, optimizer runs, gap
// certification and SVG reports.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <metabbo/metabbo.hpp>

namespace {

using namespace metabbo;

constexpr const char* kRunFormat = "meta-bbo-run-v1";

// Stream-derivation tags. Parameter draws share one tag so that runs with
// different modes but the same seed see identical problem instances, while
// each mode's algorithm randomness stays independent.
constexpr std::uint64_t kThetaTag = 1;
constexpr std::uint64_t kTrainTag = 2;
constexpr std::uint64_t kProbeTag = 99;

std::uint64_t mode_tag(const std::string& mode) {
  if (mode == "glis") return 100;
  if (mode == "meta-glis") return 101;
  if (mode == "de") return 102;
  if (mode == "pso") return 103;
  throw std::invalid_argument("unknown mode '" + mode + "'");
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct GenMetaOptions {
  std::string problem = "rosenbrock";
  int n_x = 20;
  double halfwidth = 2.5;
  int N = 500;
  int K = 1000;
  std::string solver = "de";
  int population = 0;
  long generations = 1000;
  long evaluations = 0;  // 0 -> population * (generations + 1)
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  std::string out = "dataset.json";
  bool gzip = false;
};

int cmd_gen_meta(const GenMetaOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const ProblemClass problem = make_problem(opt.problem, opt.n_x, opt.halfwidth);
  SolverSpec solver;
  solver.method = opt.solver;
  solver.population = opt.population;
  const long pop = solver.effective_population(opt.n_x);
  solver.budget.max_generations = opt.generations;
  solver.budget.max_evaluations =
      opt.evaluations > 0 ? opt.evaluations : pop * (opt.generations + 1);
  const MetaDataset data =
      build_meta_dataset(problem, solver, opt.N, opt.K, RngStream(opt.seed, opt.stream));
  save_meta_dataset(data, opt.out, opt.gzip);
  std::cout << "wrote " << opt.out << ": N=" << data.N << " K=" << data.K
            << " n_x=" << data.n_x << " (" << elapsed_seconds(start) << " s)\n";
  return 0;
}

struct TrainAeOptions {
  std::string data;
  int n_z = 3;
  double lambda = 0.5;
  int epochs = 2000;
  int batch = 256;
  double learning_rate = 1e-3;
  double lr_decay = 0.9;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  bool linear_decoder = false;
  std::string out = "embedding.json";
};

// Small probe network with the production activations, sized to stay within
// the finite-difference budget of the gradient check.
double probe_gradient_check(const MetaDataset& data, double lambda, RngStream rng) {
  const int n_x = data.n_x;
  int hidden = 8;
  auto params_for = [n_x](int h) {
    return 2 * (h * n_x + h) + (2 * h + 2) + (2 * h + h) + n_x;
  };
  while (hidden > 1 && params_for(hidden) > 200) --hidden;
  EmbeddingSpec spec;
  spec.encoder.layer_sizes = {n_x, hidden, 2};
  spec.encoder.output_box = BoxDomain::unit(2);
  spec.decoder.layer_sizes = {2, hidden, n_x};
  spec.decoder.output_box = data.domain;
  spec.domain = data.domain;

  const MetaInstance& inst = data.instances.front();
  const int count = static_cast<int>(std::min<Eigen::Index>(12, inst.points.rows()));
  const Eigen::MatrixXd samples = inst.points.topRows(count);
  const Eigen::VectorXd weights = rank_weights(inst.values.head(count), lambda);
  return gradient_check(spec, samples, weights, rng);
}

int cmd_train_ae(const TrainAeOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const MetaDataset data = load_meta_dataset(opt.data);
  if (opt.n_z < 1 || opt.n_z >= data.n_x)
    throw std::invalid_argument("train-ae: require 1 <= nz < n_x");

  const RngStream master(opt.seed, opt.stream);
  const double probe = probe_gradient_check(data, opt.lambda, master.derive(kProbeTag));

  EmbeddingSpec spec =
      default_embedding_spec(data.n_x, opt.n_z, data.domain,
                             opt.linear_decoder ? DecoderKind::linear : DecoderKind::mlp);
  TrainConfig cfg;
  cfg.lambda = opt.lambda;
  cfg.epochs = opt.epochs;
  cfg.batch_size = opt.batch;
  cfg.learning_rate = opt.learning_rate;
  cfg.lr_decay = opt.lr_decay;
  cfg.seed = master.derive(kTrainTag);
  const Embedding embedding = train_autoencoder(spec, data, cfg);
  save_embedding(embedding, opt.out);
  std::cout << "wrote " << opt.out << ": n_z=" << opt.n_z
            << " final_loss=" << weighted_loss(embedding, data, opt.lambda)
            << " gradient_check=" << probe << " (" << elapsed_seconds(start) << " s)\n";
  return 0;
}

struct RunOptions {
  std::string mode = "glis";
  std::string problem = "rosenbrock";
  int n_x = 20;
  double halfwidth = 2.5;
  std::string embedding;
  int m_init = 0;  // 0 -> 2 * search dimension
  int m_max = 100;
  double delta = 1.0;
  std::string kernel;  // "", "invquad" or "sqexp"; "" -> cross-validated invquad
  double mu = 1.0;
  double gamma = 1e-6;
  int population = 0;
  int instances = 1;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  std::string summary = "run.json";
  std::string outdir;
  bool timings = false;
};

RunResult trace_to_result(const SolveTrace& trace) {
  RunResult r;
  r.trace.reserve(trace.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    best = std::min(best, trace.value(i));
    r.trace.push_back(IterationRecord{trace.point(i), trace.point(i), trace.value(i), best,
                                      0.0, 0.0});
  }
  r.best_f = trace.best_value();
  r.best_x = trace.best_point();
  return r;
}

int cmd_run(const RunOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t tag = mode_tag(opt.mode);
  const ProblemClass problem = make_problem(opt.problem, opt.n_x, opt.halfwidth);
  if (opt.instances < 1) throw std::invalid_argument("run: instances must be >= 1");

  std::optional<Embedding> embedding;
  if (opt.mode == "meta-glis") {
    if (opt.embedding.empty())
      throw std::invalid_argument("run: --embedding is required for meta-glis");
    embedding = load_embedding(opt.embedding);
    if (embedding->n_x != problem.dim_x)
      throw std::invalid_argument("run: embedding dimension does not match the problem");
  }

  const int search_dim = embedding ? embedding->n_z : problem.dim_x;
  const int m_init = opt.m_init > 0 ? opt.m_init : 2 * search_dim;

  const RngStream master(opt.seed, opt.stream);
  std::vector<Eigen::VectorXd> thetas(static_cast<std::size_t>(opt.instances));
  for (int i = 0; i < opt.instances; ++i) {
    RngStream theta_rng = master.derive(kThetaTag).derive(static_cast<std::uint64_t>(i));
    thetas[static_cast<std::size_t>(i)] = problem.param_sampler(theta_rng);
  }

  std::vector<RunResult> results(static_cast<std::size_t>(opt.instances));
  parallel_for(opt.instances, [&](int i) {
    const Eigen::VectorXd& theta = thetas[static_cast<std::size_t>(i)];
    const auto objective = [&](const Eigen::VectorXd& x) {
      return problem.objective(x, theta);
    };
    const RngStream run_rng = master.derive(tag).derive(static_cast<std::uint64_t>(i));
    RunResult result;
    if (opt.mode == "glis" || opt.mode == "meta-glis") {
      GlisConfig cfg;
      cfg.m_init = m_init;
      cfg.m_max = opt.m_max;
      cfg.delta = opt.delta;
      if (!opt.kernel.empty())
        cfg.kernel = KernelSpec{kernel_family_from_name(opt.kernel), opt.mu, opt.gamma};
      cfg.seed = run_rng;
      result = run_glis(objective,
                        embedding ? BoxDomain::unit(search_dim) : problem.domain,
                        embedding ? &*embedding : nullptr, cfg);
    } else {
      SolverSpec solver;
      solver.method = opt.mode;
      solver.population = opt.population;
      solver.budget = EvalBudget{opt.m_max, opt.m_max};  // evaluation-capped
      result = trace_to_result(solver.solve(objective, problem.domain, run_rng));
    }
    results[static_cast<std::size_t>(i)] = std::move(result);
  });

  if (!opt.outdir.empty()) {
    std::filesystem::create_directories(opt.outdir);
    for (int i = 0; i < opt.instances; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "trace_%04d.csv", i);
      write_trace_csv(results[static_cast<std::size_t>(i)],
                      (std::filesystem::path(opt.outdir) / name).string(), opt.timings);
    }
  }

  std::vector<std::vector<double>> curves;
  curves.reserve(results.size());
  for (const auto& r : results) curves.push_back(best_so_far_curve(r));
  const SeriesStats stats = summarize_curves(curves);

  json instances = json::array();
  for (int i = 0; i < opt.instances; ++i) {
    const auto& r = results[static_cast<std::size_t>(i)];
    instances.push_back(json{{"index", i},
                             {"theta", vector_to_json(thetas[static_cast<std::size_t>(i)])},
                             {"best_f", r.best_f},
                             {"best_x", vector_to_json(r.best_x)},
                             {"evaluations", r.trace.size()}});
  }
  const json summary{{"format", kRunFormat},
                     {"problem", json{{"name", opt.problem},
                                      {"n_x", opt.n_x},
                                      {"halfwidth", opt.halfwidth}}},
                     {"mode", opt.mode},
                     {"seed", opt.seed},
                     {"stream", opt.stream},
                     {"m_init", m_init},
                     {"m_max", opt.m_max},
                     {"embedding", opt.embedding},
                     {"instances", instances},
                     {"curve_mean", stats.mean},
                     {"curve_std", stats.stddev}};
  write_file(opt.summary, summary.dump(2) + "\n");
  std::cout << "wrote " << opt.summary << ": mode=" << opt.mode
            << " instances=" << opt.instances << " final_mean_best=" << stats.mean.back()
            << " (" << elapsed_seconds(start) << " s)\n";
  return 0;
}

struct CertifyOptions {
  std::string latent;
  std::string full;
  std::string gaps_in;
  double alpha = 0.1;
  double delta = 0.05;
  double epsilon = 1e-6;
  std::string cert_out = "certificate.json";
  std::string gaps_out;
  std::string cdf_out;
};

GapSampleSet gaps_from_summaries(const std::string& latent_path, const std::string& full_path,
                                 double epsilon) {
  const json latent = load_json_file(latent_path);
  const json full = load_json_file(full_path);
  require_format(latent, kRunFormat, latent_path);
  require_format(full, kRunFormat, full_path);
  if (latent.at("problem") != full.at("problem"))
    throw std::invalid_argument("certify: summaries describe different problems");
  const json& li = latent.at("instances");
  const json& fi = full.at("instances");
  if (li.size() != fi.size())
    throw std::invalid_argument("certify: summaries have different instance counts");

  GapConfig cfg;
  cfg.epsilon = epsilon;
  GapSampleSet set;
  set.epsilon = epsilon;
  set.seed = latent.at("seed").get<std::uint64_t>();
  set.stream = latent.at("stream").get<std::uint64_t>();
  const std::uint64_t latent_tag = mode_tag(latent.at("mode").get<std::string>());
  const std::uint64_t full_tag = mode_tag(full.at("mode").get<std::string>());
  for (std::size_t i = 0; i < li.size(); ++i) {
    if (li[i].at("theta") != fi[i].at("theta"))
      throw std::invalid_argument(
          "certify: instance " + std::to_string(i) +
          " has mismatched parameter draws; rerun both modes with the same seed");
    const double f_latent = li[i].at("best_f").get<double>();
    const double f_full = fi[i].at("best_f").get<double>();
    set.gaps.push_back(performance_gap(f_latent, f_full, cfg));
    set.provenance.push_back(
        GapProvenance{static_cast<std::uint64_t>(i), full_tag, latent_tag, f_full, f_latent});
  }
  return set;
}

int cmd_certify(const CertifyOptions& opt) {
  GapSampleSet set;
  if (!opt.gaps_in.empty()) {
    set = gap_samples_from_json(load_json_file(opt.gaps_in), opt.gaps_in);
  } else {
    if (opt.latent.empty() || opt.full.empty())
      throw std::invalid_argument("certify: provide --latent and --full summaries or --gaps-in");
    set = gaps_from_summaries(opt.latent, opt.full, opt.epsilon);
  }
  const GapCertificate cert = certify(set, opt.alpha, opt.delta);
  write_file(opt.cert_out, certificate_to_json(cert).dump(2) + "\n");
  if (!opt.gaps_out.empty()) write_file(opt.gaps_out, gap_samples_to_json(set).dump(2) + "\n");
  if (!opt.cdf_out.empty()) write_cdf_csv(set.gaps, opt.cdf_out);
  std::cout << "wrote " << opt.cert_out << ": m=" << cert.m << " epsilon_m=" << cert.epsilon_m
            << " k_star=" << cert.k_star << " bound=" << cert.bound << "\n";
  return 0;
}

struct ReportOptions {
  std::vector<std::string> inputs;
  std::string gaps;
  std::string certificate;
  std::string out;
};

int cmd_report_convergence(const ReportOptions& opt) {
  if (opt.inputs.empty()) throw std::invalid_argument("report: need at least one --input");
  std::vector<NamedSeries> series;
  for (const auto& path : opt.inputs) {
    const json summary = load_json_file(path);
    require_format(summary, kRunFormat, path);
    NamedSeries s;
    s.label = summary.at("mode").get<std::string>();
    s.stats.mean = summary.at("curve_mean").get<std::vector<double>>();
    s.stats.stddev = summary.at("curve_std").get<std::vector<double>>();
    if (s.stats.mean.empty()) throw std::invalid_argument("report: '" + path + "' has no curve");
    series.push_back(std::move(s));
  }
  write_convergence_svg(series, opt.out);
  std::cout << "wrote " << opt.out << "\n";
  return 0;
}

int cmd_report_cdf(const ReportOptions& opt) {
  const GapSampleSet set = gap_samples_from_json(load_json_file(opt.gaps), opt.gaps);
  const GapCertificate cert =
      certificate_from_json(load_json_file(opt.certificate), opt.certificate);
  const long empirical_k = static_cast<long>(
      std::ceil((1.0 - cert.alpha) * static_cast<double>(set.gaps.size())));
  const double quantile =
      order_statistic(set.gaps, std::max<long>(1, empirical_k));
  write_cdf_svg(set.gaps, cert.bound, quantile, cert.alpha, opt.out);
  std::cout << "wrote " << opt.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meta-learned black-box optimization toolkit"};
  app.require_subcommand(1);

  GenMetaOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-meta", "generate a meta-dataset of near-optimal points");
  gen_cmd->add_option("--problem", gen.problem, "problem name from the registry");
  gen_cmd->add_option("--nx", gen.n_x, "decision-space dimension");
  gen_cmd->add_option("--halfwidth", gen.halfwidth, "box half-width");
  gen_cmd->add_option("--N", gen.N, "number of parameter instances");
  gen_cmd->add_option("--K", gen.K, "near-optimal points kept per instance");
  gen_cmd->add_option("--solver", gen.solver, "offline solver: de or pso");
  gen_cmd->add_option("--pop", gen.population, "population size (0 = default)");
  gen_cmd->add_option("--generations", gen.generations, "solver generations");
  gen_cmd->add_option("--evaluations", gen.evaluations, "evaluation cap (0 = pop*(gen+1))");
  gen_cmd->add_option("--seed", gen.seed, "master seed");
  gen_cmd->add_option("--stream", gen.stream, "stream id");
  gen_cmd->add_option("--out", gen.out, "output dataset path");
  gen_cmd->add_flag("--gzip", gen.gzip, "gzip the output");

  TrainAeOptions train;
  CLI::App* train_cmd = app.add_subcommand("train-ae", "train the bottleneck embedding");
  train_cmd->add_option("--data", train.data, "meta-dataset path")->required();
  train_cmd->add_option("--nz", train.n_z, "latent dimension");
  train_cmd->add_option("--lambda", train.lambda, "rank-decay weight in [0,1)");
  train_cmd->add_option("--epochs", train.epochs, "training epochs");
  train_cmd->add_option("--batch", train.batch, "mini-batch size");
  train_cmd->add_option("--lr", train.learning_rate, "learning rate");
  train_cmd->add_option("--lr-decay", train.lr_decay, "fraction of lr removed by the end");
  train_cmd->add_option("--seed", train.seed, "master seed");
  train_cmd->add_option("--stream", train.stream, "stream id");
  train_cmd->add_flag("--linear-decoder", train.linear_decoder, "use x = Az + b decoder");
  train_cmd->add_option("--out", train.out, "output embedding path");

  RunOptions run;
  CLI::App* run_cmd = app.add_subcommand("run", "optimize test instances with a chosen method");
  run_cmd->add_option("--mode", run.mode, "glis | meta-glis | de | pso")->required();
  run_cmd->add_option("--problem", run.problem, "problem name");
  run_cmd->add_option("--nx", run.n_x, "decision-space dimension");
  run_cmd->add_option("--halfwidth", run.halfwidth, "box half-width");
  run_cmd->add_option("--embedding", run.embedding, "embedding path (meta-glis)");
  run_cmd->add_option("--minit", run.m_init, "initial design size (0 = 2 * dimension)");
  run_cmd->add_option("--mmax", run.m_max, "total evaluation budget");
  run_cmd->add_option("--delta", run.delta, "exploration weight");
  run_cmd->add_option("--kernel", run.kernel, "fixed kernel: invquad or sqexp (default: CV)");
  run_cmd->add_option("--mu", run.mu, "kernel width for --kernel");
  run_cmd->add_option("--gamma", run.gamma, "ridge weight for --kernel");
  run_cmd->add_option("--pop", run.population, "population for de/pso (0 = default)");
  run_cmd->add_option("--instances", run.instances, "number of test instances");
  run_cmd->add_option("--seed", run.seed, "master seed");
  run_cmd->add_option("--stream", run.stream, "stream id");
  run_cmd->add_option("--summary", run.summary, "output summary path");
  run_cmd->add_option("--outdir", run.outdir, "directory for per-instance trace CSVs");
  run_cmd->add_flag("--timings", run.timings, "record wall times in traces (not reproducible)");

  CertifyOptions cert;
  CLI::App* cert_cmd = app.add_subcommand("certify", "certify the performance gap distribution");
  cert_cmd->add_option("--latent", cert.latent, "run summary of the latent-space method");
  cert_cmd->add_option("--full", cert.full, "run summary of the full-space baseline");
  cert_cmd->add_option("--gaps-in", cert.gaps_in, "precomputed gap-sample file");
  cert_cmd->add_option("--alpha", cert.alpha, "quantile level in (0,1)");
  cert_cmd->add_option("--delta", cert.delta, "confidence level in (0,1)");
  cert_cmd->add_option("--epsilon", cert.epsilon, "denominator guard");
  cert_cmd->add_option("--cert-out", cert.cert_out, "output certificate path");
  cert_cmd->add_option("--gaps-out", cert.gaps_out, "output gap-sample path");
  cert_cmd->add_option("--cdf-out", cert.cdf_out, "output empirical-CDF CSV path");

  ReportOptions report;
  CLI::App* report_cmd = app.add_subcommand("report", "render SVG charts");
  report_cmd->require_subcommand(1);
  CLI::App* conv_cmd = report_cmd->add_subcommand("convergence", "mean/std convergence bands");
  conv_cmd->add_option("--input", report.inputs, "run summary (repeatable)")->required();
  conv_cmd->add_option("--out", report.out, "output SVG path")->required();
  CLI::App* cdf_cmd = report_cmd->add_subcommand("cdf", "empirical CDF with bound markers");
  cdf_cmd->add_option("--gaps", report.gaps, "gap-sample file")->required();
  cdf_cmd->add_option("--certificate", report.certificate, "certificate file")->required();
  cdf_cmd->add_option("--out", report.out, "output SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen_cmd) return cmd_gen_meta(gen);
    if (*train_cmd) return cmd_train_ae(train);
    if (*run_cmd) return cmd_run(run);
    if (*cert_cmd) return cmd_certify(cert);
    if (*report_cmd) {
      if (*conv_cmd) return cmd_report_convergence(report);
      if (*cdf_cmd) return cmd_report_cdf(report);
    }
  } catch (const metabbo::InsufficientSamplesError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
