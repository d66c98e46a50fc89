#include "experiments.hpp"

#include <perdl/distances.hpp>
#include <perdl/ingest.hpp>
#include <perdl/perma.hpp>
#include <perdl/trace_io.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

namespace perdl_cli {

namespace fs = std::filesystem;
using namespace perdl;

namespace {

constexpr const char* kArtifactVersion = "0.1.0";

void declare_experiment_keys(Config& cfg) {
  cfg.declare("experiment.scenario", "synthetic");
  cfg.declare("experiment.rounds", "50");
  cfg.declare("experiment.r_global", "");
  cfg.declare("experiment.seeds", "1");
  cfg.declare("experiment.out", "out");
  cfg.declare("experiment.renormalize", "on");
  cfg.declare("experiment.threads", "1");
  cfg.declare("experiment.timings", "off");
  cfg.declare("experiment.t_refine", "0");
  cfg.declare("experiment.mode", "perma");  // reconstruct: perma | single
  cfg.declare("experiment.eps", "0.01");    // validate: per-client epsilon
}

void declare_synth_keys(Config& cfg) {
  cfg.declare("synth.num_clients", "10");
  cfg.declare("synth.dim", "6");
  cfg.declare("synth.atoms_per_client", "6");
  cfg.declare("synth.global_atoms", "3");
  cfg.declare("synth.samples_per_client", "200");
  cfg.declare("synth.bernoulli_p", "0.2");
  cfg.declare("synth.truncation", "0.3");
  cfg.declare("synth.weak_clients", "0");
  cfg.declare("synth.weak_divisor", "10");
}

void declare_solver_keys(Config& cfg) {
  cfg.declare("solver.kind", "orthogonal");
  cfg.declare("solver.zeta", "0.15");
  cfg.declare("solver.eta", "0");  // 0 = per-step default
  cfg.declare("solver.renormalize_columns", "on");
  cfg.declare("warm_start.initial_zeta", "0.5");
  cfg.declare("warm_start.shrink", "0.9");
  cfg.declare("warm_start.final_zeta", "");  // defaults to solver.zeta
  cfg.declare("warm_start.iterations_per_level", "10");
}

void declare_data_keys(Config& cfg) {
  cfg.declare("data.pool");
  cfg.declare("data.labels");
  cfg.declare("data.per_client_count", "500");
  cfg.declare("data.majority_fraction", "0.9");
  cfg.declare("data.num_clients", "");
  cfg.declare("data.frames");
  cfg.declare("data.clients");
  cfg.declare("data.channels", "3");
  cfg.declare("data.patch_rows", "12");
  cfg.declare("data.patch_cols", "16");
  cfg.declare("data.stride_rows", "12");
  cfg.declare("data.stride_cols", "16");
  cfg.declare("data.channel_mode", "stack");
  cfg.declare("data.atoms", "");
  cfg.declare("data.k", "");
  cfg.declare("match.dicts");
  cfg.declare("match.dump_dag");
  cfg.declare("validate.dicts");
  cfg.declare("validate.random_candidates", "0");
}

DlAlgorithm solver_from(const Config& cfg) {
  DlAlgorithm alg;
  const std::string kind = cfg.get("solver.kind");
  if (kind == "orthogonal") {
    alg.kind = DlKind::kOrthogonalAltMin;
  } else if (kind == "general") {
    alg.kind = DlKind::kGeneralAltMin;
  } else {
    throw ConfigError("solver.kind: expected orthogonal or general, got '" + kind + "'");
  }
  alg.threshold = cfg.get_double("solver.zeta");
  alg.step_size = cfg.get_double("solver.eta");
  alg.renormalize = cfg.get_bool("solver.renormalize_columns");
  if (alg.threshold < 0.0) throw ConfigError("solver.zeta: must be >= 0");
  return alg;
}

WarmStartConfig warm_from(const Config& cfg) {
  WarmStartConfig warm;
  warm.initial_threshold = cfg.get_double("warm_start.initial_zeta");
  warm.shrink = cfg.get_double("warm_start.shrink");
  warm.final_threshold = cfg.has("warm_start.final_zeta")
                             ? cfg.get_double("warm_start.final_zeta")
                             : cfg.get_double("solver.zeta");
  warm.iterations_per_level = static_cast<int>(cfg.get_int("warm_start.iterations_per_level"));
  try {
    warm.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("warm_start: ") + e.what());
  }
  return warm;
}

SynthConfig synth_from(const Config& cfg, std::uint64_t seed) {
  SynthConfig synth;
  synth.num_clients = static_cast<int>(cfg.get_int("synth.num_clients"));
  synth.dim = static_cast<int>(cfg.get_int("synth.dim"));
  synth.atoms_per_client = static_cast<int>(cfg.get_int("synth.atoms_per_client"));
  synth.global_atoms = static_cast<int>(cfg.get_int("synth.global_atoms"));
  synth.samples_per_client = static_cast<int>(cfg.get_int("synth.samples_per_client"));
  synth.bernoulli_p = cfg.get_double("synth.bernoulli_p");
  synth.truncation = cfg.get_double("synth.truncation");
  synth.seed = seed;
  try {
    synth.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("synth: ") + e.what());
  }
  return synth;
}

std::vector<std::uint64_t> seeds_from(const Config& cfg) {
  auto seeds = cfg.get_u64_list("experiment.seeds");
  if (seeds.empty()) throw ConfigError("experiment.seeds: at least one seed required");
  return seeds;
}

void write_manifest(const Config& cfg, const fs::path& out_dir,
                    const std::string& command) {
  std::ofstream out(out_dir / "manifest.txt");
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir.string());
  out << "artifact_version = " << kArtifactVersion << "\n";
  out << "command = " << command << "\n";
  for (const auto& [key, value] : cfg.resolved()) {
    out << key << " = " << value << "\n";
  }
}

fs::path prepare_out_dir(const Config& cfg) {
  fs::path out_dir(cfg.require("experiment.out"));
  fs::create_directories(out_dir);
  return out_dir;
}

int resolved_r_global(const Config& cfg, int fallback) {
  return cfg.has("experiment.r_global")
             ? static_cast<int>(cfg.get_int("experiment.r_global"))
             : fallback;
}

std::vector<ClientState> build_clients(const std::vector<Eigen::MatrixXd>& data,
                                       const Config& cfg, int num_atoms,
                                       std::uint64_t seed) {
  DlAlgorithm alg = solver_from(cfg);
  WarmStartConfig warm = warm_from(cfg);
  const int t_refine = static_cast<int>(cfg.get_int("experiment.t_refine"));
  std::vector<ClientState> clients;
  clients.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    ClientState c;
    c.id = static_cast<int>(i);
    c.data = data[i];
    c.algorithm = alg;
    c.warm_cfg = warm;
    c.warm_cfg.seed = derive_seed(seed, 7000 + i);
    c.num_atoms = num_atoms;
    c.t_refine = t_refine;
    clients.push_back(std::move(c));
  }
  return clients;
}

PermaOptions options_from(const Config& cfg, int r_global) {
  PermaOptions opts;
  opts.r_global = r_global;
  opts.rounds = static_cast<int>(cfg.get_int("experiment.rounds"));
  opts.renormalize = cfg.get_bool("experiment.renormalize");
  opts.threads = static_cast<int>(cfg.get_int("experiment.threads"));
  opts.record_timings = cfg.get_bool("experiment.timings");
  if (opts.rounds < 0) throw ConfigError("experiment.rounds: must be >= 0");
  if (opts.threads < 1) throw ConfigError("experiment.threads: must be >= 1");
  return opts;
}

struct FinalRow {
  double global_err = std::numeric_limits<double>::quiet_NaN();
  double local_err = std::numeric_limits<double>::quiet_NaN();
  double recon = std::numeric_limits<double>::quiet_NaN();
};

std::vector<FinalRow> final_rows(const std::vector<RoundTrace>& rows, int n,
                                 int last_round) {
  std::vector<FinalRow> finals(static_cast<std::size_t>(n));
  for (const auto& row : rows) {
    if (row.round != last_round) continue;
    auto& f = finals.at(static_cast<std::size_t>(row.client_id));
    f.global_err = row.global_err;
    f.local_err = row.local_err;
    f.recon = row.recon_residual;
  }
  return finals;
}

// ---------------------------------------------------------------------------
// synth

void run_synth_seed(const Config& cfg, std::uint64_t seed, const fs::path& dir) {
  fs::create_directories(dir);
  SynthConfig synth = synth_from(cfg, seed);
  const int weak = static_cast<int>(cfg.get_int("synth.weak_clients"));
  const int divisor = static_cast<int>(cfg.get_int("synth.weak_divisor"));
  if (weak < 0 || weak > synth.num_clients) {
    throw ConfigError("synth.weak_clients: must be in [0, num_clients]");
  }
  if (divisor < 1) throw ConfigError("synth.weak_divisor: must be >= 1");
  std::vector<int> samples(static_cast<std::size_t>(synth.num_clients),
                           synth.samples_per_client);
  for (int i = synth.num_clients - weak; i < synth.num_clients; ++i) {
    samples[static_cast<std::size_t>(i)] =
        std::max(1, synth.samples_per_client / divisor);
  }
  GroundTruth gt = generate_ground_truth(synth, samples);

  auto clients = build_clients(gt.data, cfg, synth.atoms_per_client, seed);
  PermaOptions opts = options_from(cfg, resolved_r_global(cfg, synth.global_atoms));

  auto indep = run_independent(clients, opts.rounds, gt, opts.threads);
  PermaResult collab = run_perma(clients, opts, &gt);

  write_round_trace_csv((dir / "perma_trace.csv").string(), collab.server.history);
  write_round_trace_csv((dir / "independent_trace.csv").string(), indep);
  write_message_log_jsonl((dir / "messages.jsonl").string(), collab.server.messages);

  auto fc = final_rows(collab.server.history, synth.num_clients, opts.rounds);
  auto fi = final_rows(indep, synth.num_clients, opts.rounds);
  std::ofstream summary(dir / "summary.csv");
  summary << "client_id,collab_global_err,collab_local_err,collab_recon,"
             "indep_global_err,indep_local_err,indep_recon\n";
  for (int i = 0; i < synth.num_clients; ++i) {
    const auto& c = fc[static_cast<std::size_t>(i)];
    const auto& d = fi[static_cast<std::size_t>(i)];
    summary << i << ',' << format_double(c.global_err) << ','
            << format_double(c.local_err) << ',' << format_double(c.recon) << ','
            << format_double(d.global_err) << ',' << format_double(d.local_err)
            << ',' << format_double(d.recon) << '\n';
  }
}

// ---------------------------------------------------------------------------
// reconstruct

std::vector<Eigen::MatrixXd> load_scenario_data(const Config& cfg,
                                                std::uint64_t seed,
                                                GroundTruth* synthetic_truth) {
  const std::string scenario = cfg.get("experiment.scenario");
  if (scenario == "synthetic") {
    SynthConfig synth = synth_from(cfg, seed);
    *synthetic_truth = generate_ground_truth(synth);
    return synthetic_truth->data;
  }
  if (scenario == "imbalanced") {
    const std::string pool_path = cfg.require("data.pool");
    const std::string labels_path = cfg.require("data.labels");
    Eigen::MatrixXd pool = read_matrix(pool_path);
    Eigen::MatrixXd label_mat = read_matrix(labels_path);
    if (label_mat.rows() != 1 && label_mat.cols() != 1) {
      throw std::runtime_error(labels_path + ": labels must be a vector");
    }
    std::vector<int> labels;
    for (Eigen::Index i = 0; i < label_mat.size(); ++i) {
      labels.push_back(static_cast<int>(std::llround(label_mat(i))));
    }
    if (static_cast<Eigen::Index>(labels.size()) != pool.cols()) {
      throw std::runtime_error("labels length does not match pool columns");
    }
    std::set<int> distinct(labels.begin(), labels.end());
    std::vector<int> label_values(distinct.begin(), distinct.end());
    const int n = cfg.has("data.num_clients")
                      ? static_cast<int>(cfg.get_int("data.num_clients"))
                      : static_cast<int>(label_values.size());
    const int count = static_cast<int>(cfg.get_int("data.per_client_count"));
    const double fraction = cfg.get_double("data.majority_fraction");
    std::vector<Eigen::MatrixXd> data;
    for (int i = 0; i < n; ++i) {
      const int majority = label_values[static_cast<std::size_t>(i) % label_values.size()];
      ClientDataset ds = build_imbalanced_split(pool, labels, majority, fraction,
                                                count, derive_seed(seed, 8000 + i));
      data.push_back(std::move(ds.data));
    }
    return data;
  }
  if (scenario == "frames") {
    auto paths = cfg.get_list("data.frames");
    if (paths.empty()) throw ConfigError("data.frames: at least one frame file required");
    const int channels = static_cast<int>(cfg.get_int("data.channels"));
    if (channels < 1) throw ConfigError("data.channels: must be >= 1");
    PatchConfig patch;
    patch.patch_rows = static_cast<int>(cfg.get_int("data.patch_rows"));
    patch.patch_cols = static_cast<int>(cfg.get_int("data.patch_cols"));
    patch.stride_rows = static_cast<int>(cfg.get_int("data.stride_rows"));
    patch.stride_cols = static_cast<int>(cfg.get_int("data.stride_cols"));
    const std::string mode = cfg.get("data.channel_mode");
    if (mode == "stack") {
      patch.channel_mode = PatchConfig::ChannelMode::kStack;
    } else if (mode == "grayscale") {
      patch.channel_mode = PatchConfig::ChannelMode::kGrayscale;
    } else {
      throw ConfigError("data.channel_mode: expected stack or grayscale");
    }
    std::vector<Frame> frames;
    for (const auto& path : paths) {
      // Channels are stored side by side: rows = H, cols = W * channels.
      Eigen::MatrixXd flat = read_matrix(path);
      if (flat.cols() % channels != 0) {
        throw std::runtime_error(path + ": columns not divisible by channel count");
      }
      const Eigen::Index width = flat.cols() / channels;
      Frame f;
      for (int c = 0; c < channels; ++c) {
        f.channels.push_back(flat.middleCols(c * width, width));
      }
      frames.push_back(std::move(f));
    }
    return frames_to_patches(frames, patch);
  }
  if (scenario == "custom") {
    auto paths = cfg.get_list("data.clients");
    if (paths.empty()) throw ConfigError("data.clients: at least one data file required");
    std::vector<Eigen::MatrixXd> data;
    for (const auto& path : paths) data.push_back(read_matrix(path));
    return data;
  }
  throw ConfigError("experiment.scenario: unknown scenario '" + scenario + "'");
}

int scenario_default_r_global(const std::string& scenario, int synth_default) {
  if (scenario == "imbalanced") return 5;
  if (scenario == "frames") return 30;
  return synth_default;
}

void run_reconstruct_seed(const Config& cfg, std::uint64_t seed, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string scenario = cfg.get("experiment.scenario");
  GroundTruth synthetic_truth;
  std::vector<Eigen::MatrixXd> data = load_scenario_data(cfg, seed, &synthetic_truth);
  const int n = static_cast<int>(data.size());
  if (n < 1) throw std::runtime_error("no client data");
  const int dim = static_cast<int>(data.front().rows());
  for (int i = 0; i < n; ++i) {
    if (data[static_cast<std::size_t>(i)].rows() != dim) {
      throw std::runtime_error("client " + std::to_string(i) +
                               ": data dimension differs from client 0");
    }
  }

  int num_atoms = cfg.has("data.atoms") ? static_cast<int>(cfg.get_int("data.atoms"))
                                        : dim;
  if (scenario == "synthetic") {
    num_atoms = static_cast<int>(cfg.get_int("synth.atoms_per_client"));
  }
  const int r_global = resolved_r_global(
      cfg, scenario_default_r_global(
               scenario, static_cast<int>(cfg.get_int("synth.global_atoms"))));
  int k = cfg.has("data.k") ? static_cast<int>(cfg.get_int("data.k"))
                            : (scenario == "imbalanced" ? 5
                               : scenario == "frames"   ? 50
                                                        : num_atoms);
  if (k > num_atoms) {
    throw ConfigError("data.k: top-k cannot exceed the atom count");
  }

  auto clients = build_clients(data, cfg, num_atoms, seed);
  PermaOptions opts = options_from(cfg, r_global);
  const std::string mode = cfg.get("experiment.mode");
  const double zeta = cfg.get_double("solver.zeta");

  std::vector<PartitionedDictionary> partitions;
  std::vector<RoundTrace> trace;
  if (mode == "perma") {
    PermaResult res =
        run_perma(clients, opts,
                  scenario == "synthetic" ? &synthetic_truth : nullptr);
    partitions = std::move(res.partitions);
    trace = std::move(res.server.history);
    write_message_log_jsonl((dir / "messages.jsonl").string(), res.server.messages);
  } else if (mode == "single") {
    // Baseline: each client learns alone; reconstruction runs on the full
    // dictionary without a split.
    for (int i = 0; i < n; ++i) {
      ClientState& c = clients[static_cast<std::size_t>(i)];
      Dictionary d = warm_start(c.data, c.warm_cfg, c.algorithm, c.num_atoms);
      for (int t = 0; t < opts.rounds; ++t) {
        d = dl_step(c.data, d, c.algorithm).dictionary;
      }
      partitions.emplace_back(Dictionary::empty(dim), d);
    }
  } else {
    throw ConfigError("experiment.mode: expected perma or single, got '" + mode + "'");
  }

  std::ofstream residuals(dir / "residuals.csv");
  residuals << "client_id,residual,data_norm,relative\n";
  std::vector<SplitReconstruction> splits;
  splits.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd& y = data[static_cast<std::size_t>(i)];
    const auto& part = partitions[static_cast<std::size_t>(i)];
    splits.push_back(reconstruct_split(y, part, zeta, k));
    const SplitReconstruction& split = splits.back();
    Eigen::MatrixXd recon = split.global_part + split.local_part;
    const std::string tag = std::to_string(i);
    write_matrix_binary(recon, (dir / ("recon_" + tag + ".pdlm")).string());
    if (part.num_global() > 0) {
      write_matrix_binary(split.global_part,
                          (dir / ("recon_global_" + tag + ".pdlm")).string());
      write_matrix_binary(split.local_part,
                          (dir / ("recon_local_" + tag + ".pdlm")).string());
    }
    const double residual = (y - recon).norm();
    residuals << i << ',' << format_double(residual) << ','
              << format_double(y.norm()) << ','
              << format_double(y.norm() > 0 ? residual / y.norm() : 0.0) << '\n';
  }
  if (!trace.empty()) {
    write_round_trace_csv((dir / "trace.csv").string(), trace);
  }

  if (scenario == "frames") {
    // Re-render the split reconstructions as frames for inspection.
    PatchConfig patch;
    patch.patch_rows = static_cast<int>(cfg.get_int("data.patch_rows"));
    patch.patch_cols = static_cast<int>(cfg.get_int("data.patch_cols"));
    patch.stride_rows = static_cast<int>(cfg.get_int("data.stride_rows"));
    patch.stride_cols = static_cast<int>(cfg.get_int("data.stride_cols"));
    patch.channel_mode = cfg.get("data.channel_mode") == "grayscale"
                             ? PatchConfig::ChannelMode::kGrayscale
                             : PatchConfig::ChannelMode::kStack;
    auto paths = cfg.get_list("data.frames");
    const int channels = static_cast<int>(cfg.get_int("data.channels"));
    Eigen::MatrixXd probe = read_matrix(paths.front());
    const int height = static_cast<int>(probe.rows());
    const int width = static_cast<int>(probe.cols()) / channels;
    const int effective = patch.channel_mode == PatchConfig::ChannelMode::kGrayscale
                              ? 1
                              : channels;
    for (int i = 0; i < n; ++i) {
      const std::string tag = std::to_string(i);
      if (partitions[static_cast<std::size_t>(i)].num_global() == 0) continue;
      const SplitReconstruction& split = splits[static_cast<std::size_t>(i)];
      for (const auto& [name, mat] :
           {std::pair<std::string, const Eigen::MatrixXd*>{"frame_global_", &split.global_part},
            {"frame_local_", &split.local_part}}) {
        auto frames = patches_to_frames({*mat}, patch, height, width, channels);
        Eigen::MatrixXd flat(height, width * effective);
        for (int c = 0; c < effective; ++c) {
          flat.middleCols(c * width, width) = frames[0].channels[static_cast<std::size_t>(c)];
        }
        write_matrix_binary(flat, (dir / (name + tag + ".pdlm")).string());
      }
    }
  }
}

// ---------------------------------------------------------------------------
// validate

std::vector<Dictionary> validation_dictionaries(const Config& cfg,
                                                std::uint64_t seed, int* r_global) {
  auto paths = cfg.get_list("validate.dicts");
  if (!paths.empty()) {
    std::vector<Dictionary> dicts;
    for (const auto& path : paths) {
      Eigen::MatrixXd m = read_matrix(path);
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (std::abs(m.col(j).norm() - 1.0) > 1e-6) {
          throw std::runtime_error(path + ": column " + std::to_string(j) +
                                   " is not unit-norm; normalize before validating");
        }
        m.col(j) /= m.col(j).norm();
      }
      dicts.emplace_back(std::move(m), true);
    }
    *r_global = resolved_r_global(cfg, 0);
    return dicts;
  }
  SynthConfig synth = synth_from(cfg, seed);
  auto [global, locals] = generate_dictionaries(synth);
  std::vector<Dictionary> dicts;
  for (const auto& local : locals) {
    dicts.push_back(PartitionedDictionary(global, local).concatenated());
  }
  *r_global = resolved_r_global(cfg, synth.global_atoms);
  return dicts;
}

void run_validate(const Config& cfg, std::uint64_t seed, std::ostream& report) {
  int r_global = 0;
  std::vector<Dictionary> dicts = validation_dictionaries(cfg, seed, &r_global);
  const int n = static_cast<int>(dicts.size());
  if (n == 0) throw std::runtime_error("no dictionaries to validate");
  const int dim = dicts.front().dim();

  report << "clients: " << n << ", dimension: " << dim
         << ", global atoms: " << r_global << "\n\n";

  double mu_max = 0.0;
  for (int i = 0; i < n; ++i) {
    const double mu = incoherence(dicts[static_cast<std::size_t>(i)]);
    mu_max = std::max(mu_max, mu);
    report << "client " << i << ": mu_hat = " << format_double(mu);
    if (dicts[static_cast<std::size_t>(i)].num_atoms() < 2) {
      report << " (single atom, trivially 0)";
    }
    report << "\n";
  }
  report << "max mu_hat = " << format_double(mu_max) << "\n\n";

  std::vector<Dictionary> locals;
  bool has_locals = true;
  for (const auto& d : dicts) {
    if (d.num_atoms() <= r_global) {
      has_locals = false;
      break;
    }
    Eigen::MatrixXd rest =
        d.atoms().rightCols(d.num_atoms() - r_global);
    locals.emplace_back(std::move(rest), true);
  }

  const double incoherence_term =
      std::sqrt(std::max(0.0, 2.0 - 2.0 * mu_max / std::sqrt(static_cast<double>(dim))));
  report << "sqrt(2 - 2*mu/sqrt(d)) = " << format_double(incoherence_term) << "\n";

  double beta = std::numeric_limits<double>::quiet_NaN();
  if (has_locals && r_global >= 0) {
    const int extra = static_cast<int>(cfg.get_int("validate.random_candidates"));
    beta = estimate_beta(locals, extra, derive_seed(seed, 4242));
    report << "beta_hat = " << format_double(beta)
           << " (candidate-set upper bound)\n";
  } else {
    report << "beta_hat = not applicable (no local atoms)\n";
  }

  // One epsilon for everyone, or one per client.
  auto eps_items = cfg.get_list("experiment.eps");
  std::vector<double> eps(static_cast<std::size_t>(n));
  if (eps_items.size() == 1) {
    std::fill(eps.begin(), eps.end(), cfg.get_double("experiment.eps"));
  } else if (static_cast<int>(eps_items.size()) == n) {
    for (int i = 0; i < n; ++i) {
      try {
        eps[static_cast<std::size_t>(i)] = std::stod(eps_items[static_cast<std::size_t>(i)]);
      } catch (const std::exception&) {
        throw ConfigError("experiment.eps: unparseable entry '" +
                          eps_items[static_cast<std::size_t>(i)] + "'");
      }
    }
  } else {
    throw ConfigError("experiment.eps: give one value or one per client (" +
                      std::to_string(n) + ")");
  }
  double eps_sum = 0.0;
  for (double e : eps) eps_sum += e;
  const double lhs = 4.0 * eps_sum;
  const double rhs = has_locals ? std::min(incoherence_term, beta) : incoherence_term;
  const double margin = rhs - lhs;
  report << "\n";
  if (eps_items.size() == 1) {
    report << "per-client epsilon = " << format_double(eps.front()) << "\n";
  } else {
    for (int i = 0; i < n; ++i) {
      report << "epsilon[" << i << "] = "
             << format_double(eps[static_cast<std::size_t>(i)]) << "\n";
    }
  }
  report << "4 * sum(eps_i) = " << format_double(lhs) << "\n"
         << "bound = " << format_double(rhs) << "\n"
         << "margin = " << format_double(margin) << "\n"
         << "hypothesis " << (margin >= 0.0 ? "HOLDS" : "FAILS") << "\n";
}

// ---------------------------------------------------------------------------
// match

void run_match(const Config& cfg, const fs::path& dir) {
  auto paths = cfg.get_list("match.dicts");
  if (paths.size() < 2) {
    throw ConfigError("match.dicts: at least two dictionary files required");
  }
  std::vector<Dictionary> dicts;
  for (const auto& path : paths) {
    Eigen::MatrixXd m = read_matrix(path);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (std::abs(m.col(j).norm() - 1.0) > 1e-6) {
        throw std::runtime_error(path + ": column " + std::to_string(j) +
                                 " is not unit-norm; normalize before matching");
      }
      m.col(j) /= m.col(j).norm();
    }
    dicts.emplace_back(std::move(m), true);
  }
  if (!cfg.has("experiment.r_global")) {
    throw ConfigError("experiment.r_global: required for match");
  }
  const int r_global = static_cast<int>(cfg.get_int("experiment.r_global"));
  const bool renormalize = cfg.get_bool("experiment.renormalize");

  if (cfg.has("match.dump_dag")) {
    LayeredDag dag = build_dag(dicts);
    std::ofstream dump(cfg.get("match.dump_dag"));
    if (!dump) throw std::runtime_error("cannot open dag dump path");
    dump_dag(dag, dump);
  }

  MatchResult res = global_matching(dicts, r_global, renormalize);
  if (res.global_estimate.num_atoms() > 0) {
    write_matrix_binary(res.global_estimate.atoms(), (dir / "global.pdlm").string());
    write_matrix_csv(res.global_estimate.atoms(), (dir / "global.csv").string());
  }
  for (std::size_t i = 0; i < res.local_estimates.size(); ++i) {
    if (res.local_estimates[i].num_atoms() == 0) continue;
    write_matrix_binary(res.local_estimates[i].atoms(),
                        (dir / ("local_" + std::to_string(i) + ".pdlm")).string());
  }
  std::ofstream assignments(dir / "assignments.csv");
  assignments << "client_id,global_col,atom_index,sign\n";
  for (std::size_t i = 0; i < res.matched_indices.size(); ++i) {
    for (std::size_t j = 0; j < res.matched_indices[i].size(); ++j) {
      assignments << i << ',' << j << ',' << res.matched_indices[i][j] << ','
                  << res.matched_signs[i][j] << '\n';
    }
  }
  std::ofstream report(dir / "match_report.txt");
  report << "clients = " << dicts.size() << "\n"
         << "r_global = " << r_global << "\n"
         << "chain_cost = " << format_double(matching_cost(res, dicts)) << "\n"
         << "edge_relaxations = " << res.relaxations << "\n";
  for (const auto& warning : res.warnings) report << "warning: " << warning << "\n";
}

}  // namespace

void declare_schema(Config& cfg) {
  declare_experiment_keys(cfg);
  declare_synth_keys(cfg);
  declare_solver_keys(cfg);
  declare_data_keys(cfg);
}

int cmd_synth(const Config& cfg) {
  const fs::path out_dir = prepare_out_dir(cfg);
  write_manifest(cfg, out_dir, "synth");
  for (std::uint64_t seed : seeds_from(cfg)) {
    run_synth_seed(cfg, seed, out_dir / ("seed_" + std::to_string(seed)));
  }
  return 0;
}

int cmd_reconstruct(const Config& cfg) {
  const fs::path out_dir = prepare_out_dir(cfg);
  write_manifest(cfg, out_dir, "reconstruct");
  for (std::uint64_t seed : seeds_from(cfg)) {
    run_reconstruct_seed(cfg, seed, out_dir / ("seed_" + std::to_string(seed)));
  }
  return 0;
}

int cmd_validate(const Config& cfg) {
  const fs::path out_dir = prepare_out_dir(cfg);
  write_manifest(cfg, out_dir, "validate");
  const auto seeds = seeds_from(cfg);
  std::ostringstream report;
  run_validate(cfg, seeds.front(), report);
  std::ofstream file(out_dir / "validate_report.txt");
  file << report.str();
  std::cout << report.str();
  return 0;
}

int cmd_match(const Config& cfg) {
  const fs::path out_dir = prepare_out_dir(cfg);
  write_manifest(cfg, out_dir, "match");
  run_match(cfg, out_dir);
  return 0;
}

}  // namespace perdl_cli
