#include "tunmix/cli.hpp"

#include "tunmix/fcls.hpp"
#include "tunmix/hseq_io.hpp"
#include "tunmix/metrics.hpp"
#include "tunmix/pipeline.hpp"
#include "tunmix/synth.hpp"
#include "tunmix/vca.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

namespace tunmix::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// A bad-flag condition detected after parsing.
struct UsageError : Error {
  using Error::Error;
};

std::string replica_dir_name(int r) {
  std::ostringstream name;
  name << "replica_" << std::setw(4) << std::setfill('0') << r;
  return name.str();
}

void require_directory(const fs::path& dir, const char* flag) {
  if (!fs::is_directory(dir)) throw IoError(std::string(flag) + ": no such directory " + dir.string());
}

void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() +
                  (ec ? ": " + ec.message() : std::string()));
  }
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw IoError("output directory is not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

void write_json_file(const fs::path& file, const json& j) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed on " + file.string());
}

json read_json_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("malformed JSON in " + file.string() + ": " + e.what());
  }
}

// Reads an L x P endmember file; shape comes from a manifest/sidecar or, as a
// fallback, from the byte count and the expected band count.
Matrix read_endmember_file(const fs::path& file, Index expected_L) {
  if (!fs::exists(file)) throw IoError("--m0: missing file " + file.string());
  Index rows = 0, cols = 0;
  if (auto shape = io::lookup_matrix_shape(file)) {
    std::tie(rows, cols) = *shape;
  } else {
    const auto bytes = static_cast<Index>(fs::file_size(file));
    if (bytes % static_cast<Index>(sizeof(double) * expected_L) != 0) {
      throw UsageError("--m0: " + std::to_string(bytes) + " bytes is not a whole number of L=" +
                       std::to_string(expected_L) + " columns");
    }
    rows = expected_L;
    cols = bytes / static_cast<Index>(sizeof(double) * expected_L);
  }
  if (rows != expected_L) {
    throw UsageError("--m0 has L=" + std::to_string(rows) + " but the input sequence has L=" +
                     std::to_string(expected_L));
  }
  return io::read_matrix(file, rows, cols);
}

// Fans `count` jobs out over worker threads; results are collected by index
// and the first failure (lowest index) is rethrown.
std::vector<json> run_replicas(int count, const std::function<json(int)>& job) {
  std::vector<json> results(static_cast<std::size_t>(count));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(count));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < count; r = next++) {
      try {
        results[static_cast<std::size_t>(r)] = job(r);
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

// ---------------------------------------------------------------- generate

struct GenerateFlags {
  std::string config;
  std::optional<Index> L, N, T, P;
  std::optional<double> snr_db, q_var, F_scale, jitter;
  std::optional<std::uint64_t> seed;
  std::string m0;
  std::uint64_t m0_seed = 0;
  std::string out;
  int mc = 0;
};

synth::SynthConfig config_from_json(const json& j) {
  synth::SynthConfig c;
  try {
    c.L = j.value("L", c.L);
    c.N = j.value("N", c.N);
    c.T = j.value("T", c.T);
    c.P = j.value("P", c.P);
    c.dirichlet_alpha = j.value("dirichlet_alpha", c.dirichlet_alpha);
    c.F_scale = j.value("F_scale", c.F_scale);
    c.q_var = j.value("q_var", c.q_var);
    if (j.contains("snr_db")) {
      c.snr_db = j.at("snr_db").is_null() ? std::numeric_limits<double>::infinity()
                                          : j.at("snr_db").get<double>();
    }
    c.abundance_jitter_std = j.value("abundance_jitter_std", c.abundance_jitter_std);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
  } catch (const json::exception& e) {
    throw UsageError(std::string("--config: ") + e.what());
  }
  return c;
}

json config_to_json(const synth::SynthConfig& c) {
  json j{{"L", c.L}, {"N", c.N}, {"T", c.T}, {"P", c.P}, {"F_scale", c.F_scale},
         {"q_var", c.q_var}, {"abundance_jitter_std", c.abundance_jitter_std},
         {"rng_seed", c.rng_seed}};
  j["dirichlet_alpha"] = c.dirichlet_alpha.empty() ? std::vector<double>(static_cast<std::size_t>(c.P), 1.0)
                                                   : c.dirichlet_alpha;
  if (std::isinf(c.snr_db)) {
    j["snr_db"] = nullptr;
  } else {
    j["snr_db"] = c.snr_db;
  }
  return j;
}

json generate_one(const synth::SynthConfig& cfg, const Matrix& M0, const fs::path& out,
                  const std::string& m0_source) {
  ensure_writable_dir(out);
  auto [seq, gt] = synth::generate(cfg, M0);
  io::write_hseq(seq, out, cfg.rng_seed, cfg.P);

  json echo = config_to_json(cfg);
  echo["m0_source"] = m0_source;
  write_json_file(out / "config.json", echo);

  const fs::path truth = out / "truth";
  ensure_writable_dir(truth);
  io::Manifest m;
  m.L = cfg.L;
  m.N = cfg.N;
  m.T = cfg.T;
  m.P = cfg.P;
  m.seed = cfg.rng_seed;
  m.arrays["abundances"] = io::write_group(truth, "abund", gt.abundances);
  m.arrays["endmembers"] = io::write_group(truth, "endmember", gt.endmembers);
  std::vector<Matrix> psi;
  for (const auto& v : gt.psi) psi.push_back(io::devectorize(v, cfg.L, cfg.P));
  m.arrays["psi"] = io::write_group(truth, "psi", psi);
  m.arrays["clean"] = io::write_group(truth, "clean", gt.clean);
  io::write_matrix(truth / "m0.f64", M0);
  m.arrays["m0"] = io::ArrayGroup{{"m0.f64"}, M0.rows(), M0.cols()};
  io::write_matrix(truth / "base_abundances.f64", gt.base_abundances);
  m.arrays["base_abundances"] =
      io::ArrayGroup{{"base_abundances.f64"}, gt.base_abundances.rows(), gt.base_abundances.cols()};
  io::write_manifest(truth, m);

  return json{{"out", out.string()},
              {"L", cfg.L},
              {"N", cfg.N},
              {"T", cfg.T},
              {"P", cfg.P},
              {"seed", cfg.rng_seed},
              {"empirical_snr_db", std::isinf(synth::empirical_snr_db(gt.clean, gt.noisy))
                                       ? json(nullptr)
                                       : json(synth::empirical_snr_db(gt.clean, gt.noisy))},
              {"noise_variance", gt.noise_variance},
              {"abundance_temporal_std", synth::abundance_temporal_std(gt.abundances)}};
}

int cmd_generate(const GenerateFlags& f, std::ostream& out, std::ostream& err) {
  if (f.out.empty()) throw UsageError("generate: --out is required");
  synth::SynthConfig cfg;
  if (!f.config.empty()) cfg = config_from_json(read_json_file(f.config));
  if (f.L) cfg.L = *f.L;
  if (f.N) cfg.N = *f.N;
  if (f.T) cfg.T = *f.T;
  if (f.P) cfg.P = *f.P;
  if (f.snr_db) cfg.snr_db = *f.snr_db;
  if (f.q_var) cfg.q_var = *f.q_var;
  if (f.F_scale) cfg.F_scale = *f.F_scale;
  if (f.jitter) cfg.abundance_jitter_std = *f.jitter;
  if (f.seed) cfg.rng_seed = *f.seed;
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }

  Matrix M0;
  std::string m0_source;
  if (!f.m0.empty()) {
    M0 = read_endmember_file(f.m0, cfg.L);
    if (M0.cols() != cfg.P) {
      throw UsageError("--m0 has P=" + std::to_string(M0.cols()) + " but --P is " +
                       std::to_string(cfg.P));
    }
    m0_source = f.m0;
  } else {
    M0 = synth::smooth_endmembers(cfg.L, cfg.P, f.m0_seed);
    m0_source = "smooth_endmembers(seed=" + std::to_string(f.m0_seed) + ")";
  }

  const fs::path root(f.out);
  ensure_writable_dir(root);
  if (f.mc > 0) {
    const auto results = run_replicas(f.mc, [&](int r) {
      synth::SynthConfig c = cfg;
      c.rng_seed = cfg.rng_seed + static_cast<std::uint64_t>(r);
      return generate_one(c, M0, root / replica_dir_name(r), m0_source);
    });
    out << json(results).dump(2) << '\n';
    err << "generated " << f.mc << " replicas under " << root.string() << '\n';
    return kOk;
  }
  const json summary = generate_one(cfg, M0, root, m0_source);
  out << summary.dump(2) << '\n';
  err << "generated " << cfg.T << " frames of " << cfg.L << "x" << cfg.N << " in "
      << root.string() << '\n';
  return kOk;
}

// ------------------------------------------------------------------- unmix

struct UnmixFlags {
  std::string input;
  std::string m0;
  bool vca = false;
  std::optional<Index> p;
  int iters = 5;
  double lambda = 1e-8;
  std::uint64_t seed = 0;
  bool clamp_psi = false;
  std::string out;
  int mc = 0;
};

void write_result_dir(const fs::path& dir, const pipeline::UnmixResult& res, const Matrix& M0,
                      Index N, std::uint64_t seed) {
  const Index L = M0.rows();
  const Index P = M0.cols();
  io::Manifest m;
  m.L = L;
  m.N = N;
  m.T = static_cast<Index>(res.abundances.size());
  m.P = P;
  m.seed = seed;
  m.arrays["abundances"] = io::write_group(dir, "abund", res.abundances);
  m.arrays["endmembers"] = io::write_group(dir, "endmember", res.endmembers);
  std::vector<Matrix> psi;
  for (const auto& v : res.psi) psi.push_back(io::devectorize(v, L, P));
  m.arrays["psi"] = io::write_group(dir, "psi", psi);
  io::write_matrix(dir / "m0.f64", M0);
  m.arrays["m0"] = io::ArrayGroup{{"m0.f64"}, L, P};
  io::write_matrix(dir / "average_abundances.f64", res.theta_final.A);
  m.arrays["average_abundances"] = io::ArrayGroup{{"average_abundances.f64"}, P, N};
  io::write_manifest(dir, m);

  json iters = json::array();
  for (const auto& d : res.iterations) {
    iters.push_back(json{{"iteration", d.iteration},
                         {"loglik", d.loglik},
                         {"q_before", d.q_before},
                         {"q_after", d.q_after},
                         {"sigma_r2", d.sigma_r2},
                         {"q_clipped_eigenvalues", d.q_clipped}});
  }
  write_json_file(dir / "diagnostics.json", json{{"iterations", iters},
                                                 {"final_loglik", res.final_loglik},
                                                 {"final_sigma_r2", res.theta_final.sigma_r2},
                                                 {"clamped_psi_entries", res.clamped_entries}});
}

json unmix_one(const UnmixFlags& f, const fs::path& input, const fs::path& outdir,
               std::uint64_t seed) {
  require_directory(input, "--input");
  ensure_writable_dir(outdir);
  const HsiSequence seq = io::read_hseq(input);

  Matrix M0;
  json vca_info = nullptr;
  if (f.vca) {
    Index P = 0;
    if (f.p) {
      P = *f.p;
    } else {
      const auto manifest = io::read_manifest(input);
      if (!manifest.P) throw UsageError("--vca needs --p (the input manifest does not record P)");
      P = *manifest.P;
    }
    const auto v = vca::vca_extract(seq.frame(0), P, seed);
    M0 = v.endmembers;
    vca_info = json{{"indices", v.indices}, {"projective", v.projective}};
  } else {
    M0 = read_endmember_file(f.m0, seq.bands());
  }
  if (M0.cols() < 2) throw UsageError("unmix needs at least two endmembers");
  const GlmmModel model(M0);

  pipeline::PipelineConfig cfg;
  cfg.max_iters = f.iters;
  cfg.lambda = f.lambda;
  cfg.clamp_psi_nonneg = f.clamp_psi;
  cfg.seed = seed;
  const auto res = pipeline::run_kalman_em(seq, model, cfg);
  write_result_dir(outdir, res, M0, seq.pixels(), seed);

  json summary{{"out", outdir.string()},
               {"T", seq.frame_count()},
               {"P", M0.cols()},
               {"final_loglik", res.final_loglik},
               {"final_sigma_r2", res.theta_final.sigma_r2},
               {"clamped_psi_entries", res.clamped_entries}};
  if (!vca_info.is_null()) summary["vca"] = vca_info;
  return summary;
}

int cmd_unmix(const UnmixFlags& f, std::ostream& out, std::ostream& err) {
  if (f.input.empty()) throw UsageError("unmix: --input is required");
  if (f.out.empty()) throw UsageError("unmix: --out is required");
  if (f.vca == !f.m0.empty()) throw UsageError("unmix: exactly one of --m0 or --vca is required");
  if (f.iters < 1) throw UsageError("unmix: --iters must be >= 1");
  if (!(f.lambda >= 0.0)) throw UsageError("unmix: --lambda must be >= 0");
  if (f.p && *f.p < 2) throw UsageError("unmix: --p must be >= 2");

  const fs::path input(f.input), root(f.out);
  require_directory(input, "--input");
  ensure_writable_dir(root);
  if (f.mc > 0) {
    const auto results = run_replicas(f.mc, [&](int r) {
      return unmix_one(f, input / replica_dir_name(r), root / replica_dir_name(r),
                       f.seed + static_cast<std::uint64_t>(r));
    });
    out << json(results).dump(2) << '\n';
    err << "unmixed " << f.mc << " replicas into " << root.string() << '\n';
    return kOk;
  }
  const json summary = unmix_one(f, input, root, f.seed);
  out << summary.dump(2) << '\n';
  err << "unmixing finished, results in " << root.string() << '\n';
  return kOk;
}

// -------------------------------------------------------------------- fcls

struct FclsFlags {
  std::string input, m0, out;
};

int cmd_fcls(const FclsFlags& f, std::ostream& out, std::ostream& err) {
  if (f.input.empty() || f.m0.empty() || f.out.empty()) {
    throw UsageError("fcls: --input, --m0 and --out are required");
  }
  require_directory(f.input, "--input");
  ensure_writable_dir(f.out);
  const HsiSequence seq = io::read_hseq(f.input);
  const Matrix M0 = read_endmember_file(f.m0, seq.bands());

  std::vector<Matrix> abund, endm;
  for (Index t = 0; t < seq.frame_count(); ++t) {
    abund.push_back(fcls::fcls_refine_frame(seq.frame(t), M0, std::nullopt, 0.0));
    endm.push_back(M0);
  }
  io::Manifest m;
  m.L = seq.bands();
  m.N = seq.pixels();
  m.T = seq.frame_count();
  m.P = M0.cols();
  m.arrays["abundances"] = io::write_group(f.out, "abund", abund);
  m.arrays["endmembers"] = io::write_group(f.out, "endmember", endm);
  io::write_matrix(fs::path(f.out) / "m0.f64", M0);
  m.arrays["m0"] = io::ArrayGroup{{"m0.f64"}, M0.rows(), M0.cols()};
  io::write_manifest(f.out, m);
  out << json{{"out", f.out}, {"T", m.T}, {"P", M0.cols()}}.dump(2) << '\n';
  err << "FCLS abundances written to " << f.out << '\n';
  return kOk;
}

// --------------------------------------------------------------------- vca

struct VcaFlags {
  std::string input, out;
  Index p = 0;
  std::uint64_t seed = 0;
};

int cmd_vca(const VcaFlags& f, std::ostream& out, std::ostream& err) {
  if (f.input.empty() || f.out.empty()) throw UsageError("vca: --input and --out are required");
  if (f.p < 1) throw UsageError("vca: --p must be >= 1");
  require_directory(f.input, "--input");
  const HsiSequence seq = io::read_hseq(f.input);
  const auto v = vca::vca_extract(seq.frame(0), f.p, f.seed);
  io::write_matrix_with_shape(f.out, v.endmembers);
  json summary{{"out", f.out}, {"L", v.endmembers.rows()}, {"P", v.endmembers.cols()},
               {"indices", v.indices}, {"projective", v.projective}};
  summary["snr_estimate_db"] =
      std::isfinite(v.snr_estimate_db) ? json(v.snr_estimate_db) : json(nullptr);
  out << summary.dump(2) << '\n';
  err << "extracted " << f.p << " endmembers from frame 0\n";
  return kOk;
}

// -------------------------------------------------------------------- eval

struct EvalFlags {
  std::string est, truth, out;
};

std::vector<Matrix> read_named_group(const fs::path& dir, const io::Manifest& m,
                                     const std::string& name) {
  const auto it = m.arrays.find(name);
  if (it == m.arrays.end()) {
    throw IoError(dir.string() + ": manifest has no '" + name + "' array group");
  }
  return io::read_group(dir, it->second);
}

int cmd_eval(const EvalFlags& f, std::ostream& out, std::ostream& err) {
  if (f.est.empty() || f.truth.empty() || f.out.empty()) {
    throw UsageError("eval: --est, --truth and --out are required");
  }
  require_directory(f.est, "--est");
  require_directory(f.truth, "--truth");
  fs::path truth_dir(f.truth);
  fs::path observed_dir;
  if (fs::is_directory(truth_dir / "truth")) {
    observed_dir = truth_dir;
    truth_dir /= "truth";
  } else {
    observed_dir = truth_dir.parent_path();
  }

  const auto tm = io::read_manifest(truth_dir);
  const auto em_ = io::read_manifest(f.est);
  const auto true_a = read_named_group(truth_dir, tm, "abundances");
  const auto true_m = read_named_group(truth_dir, tm, "endmembers");
  const auto est_a = read_named_group(f.est, em_, "abundances");
  const auto est_m = read_named_group(f.est, em_, "endmembers");
  const HsiSequence observed = io::read_hseq(observed_dir);

  if (true_a.size() != est_a.size() || true_m.size() != est_m.size() ||
      static_cast<Index>(true_a.size()) != observed.frame_count()) {
    throw UsageError("eval: frame counts differ between --est and --truth");
  }
  for (std::size_t t = 0; t < true_a.size(); ++t) {
    if (true_a[t].rows() != est_a[t].rows() || true_a[t].cols() != est_a[t].cols() ||
        true_m[t].rows() != est_m[t].rows() || true_m[t].cols() != est_m[t].cols()) {
      throw UsageError("eval: shape mismatch at frame " + std::to_string(t));
    }
  }
  const auto s = metrics::score(true_a, true_m, observed.frames(), est_a, est_m);
  const json metrics_json{{"nrmse_a", s.nrmse_a},
                          {"nrmse_m", s.nrmse_m},
                          {"sam_m", s.sam_m},
                          {"nrmse_y", s.nrmse_y},
                          {"nrmse_a_x100", 100.0 * s.nrmse_a},
                          {"nrmse_m_x100", 100.0 * s.nrmse_m},
                          {"sam_m_x100", 100.0 * s.sam_m},
                          {"nrmse_y_x100", 100.0 * s.nrmse_y}};
  const fs::path out_file(f.out);
  if (out_file.has_parent_path()) ensure_writable_dir(out_file.parent_path());
  write_json_file(out_file, metrics_json);
  out << metrics_json.dump(2) << '\n';
  err << std::fixed << std::setprecision(2) << "NRMSE_A x100 = " << 100.0 * s.nrmse_a
      << "  NRMSE_M x100 = " << 100.0 * s.nrmse_m << "  SAM_M x100 = " << 100.0 * s.sam_m
      << "  NRMSE_Y x100 = " << 100.0 * s.nrmse_y << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kalman-filter / EM unmixing of hyperspectral image sequences", "tunmix"};
  app.require_subcommand(1);

  GenerateFlags gen;
  auto* g = app.add_subcommand("generate", "Generate a synthetic image sequence with ground truth");
  g->add_option("--config", gen.config, "JSON synthesis configuration");
  g->add_option("--L", gen.L, "Band count");
  g->add_option("--N", gen.N, "Pixel count");
  g->add_option("--T", gen.T, "Frame count");
  g->add_option("--P", gen.P, "Endmember count");
  g->add_option("--snr-db", gen.snr_db, "Sequence SNR in dB");
  g->add_option("--q-var", gen.q_var, "Innovation variance of the scaling factors");
  g->add_option("--F", gen.F_scale, "Generator transition scalar");
  g->add_option("--jitter", gen.jitter, "Per-pixel temporal abundance jitter std");
  g->add_option("--seed", gen.seed, "RNG seed");
  g->add_option("--m0", gen.m0, "Reference endmember file (L x P float64)");
  g->add_option("--m0-seed", gen.m0_seed, "Seed for the built-in smooth spectra");
  g->add_option("--out", gen.out, "Output directory");
  g->add_option("--mc", gen.mc, "Number of Monte-Carlo replicas")->check(CLI::NonNegativeNumber);

  UnmixFlags un;
  auto* u = app.add_subcommand("unmix", "Kalman smoother + EM unmixing");
  u->add_option("--input", un.input, "Input HSEQ directory");
  auto* u_m0 = u->add_option("--m0", un.m0, "Reference endmember file");
  auto* u_vca = u->add_flag("--vca", un.vca, "Extract M0 from the first frame with VCA");
  u_m0->excludes(u_vca);
  u->add_option("--p", un.p, "Endmember count for --vca");
  u->add_option("--iters", un.iters, "EM iterations (K_max)");
  u->add_option("--lambda", un.lambda, "Abundance refinement weight");
  u->add_option("--seed", un.seed, "RNG seed");
  u->add_flag("--clamp-psi", un.clamp_psi, "Clamp negative scaling factors at reconstruction");
  u->add_option("--out", un.out, "Output directory");
  u->add_option("--mc", un.mc, "Process replica_<r> subdirectories")->check(CLI::NonNegativeNumber);

  FclsFlags fc;
  auto* c = app.add_subcommand("fcls", "Per-frame FCLS baseline with fixed M0");
  c->add_option("--input", fc.input, "Input HSEQ directory");
  c->add_option("--m0", fc.m0, "Reference endmember file");
  c->add_option("--out", fc.out, "Output directory");

  VcaFlags vf;
  auto* v = app.add_subcommand("vca", "Extract endmembers from the first frame");
  v->add_option("--input", vf.input, "Input HSEQ directory");
  v->add_option("--p", vf.p, "Endmember count");
  v->add_option("--seed", vf.seed, "RNG seed");
  v->add_option("--out", vf.out, "Output endmember file");

  EvalFlags ev;
  auto* e = app.add_subcommand("eval", "Score an estimate against ground truth");
  e->add_option("--est", ev.est, "Estimate directory (unmix or fcls output)");
  e->add_option("--truth", ev.truth, "Ground-truth directory (generate output)");
  e->add_option("--out", ev.out, "Metrics JSON file");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*g) return cmd_generate(gen, out, err);
    if (*u) return cmd_unmix(un, out, err);
    if (*c) return cmd_fcls(fc, out, err);
    if (*v) return cmd_vca(vf, out, err);
    if (*e) return cmd_eval(ev, out, err);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const InvalidArgument& ex) {
    err << "error: " << ex.what() << '\n';
    return kUsage;
  } catch (const RankDeficiencyError& ex) {
    err << "error: " << ex.what() << '\n';
    return kRankDeficient;
  } catch (const NumericalError& ex) {
    err << "error: " << ex.what() << '\n';
    return kNumerical;
  } catch (const IoError& ex) {
    err << "error: " << ex.what() << '\n';
    return kIo;
  } catch (const FormatError& ex) {
    err << "error: " << ex.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& ex) {
    err << "error: " << ex.what() << '\n';
    return kIo;
  }
  return kUsage;
}

}  // namespace tunmix::cli
