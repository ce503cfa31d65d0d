#include "gpe/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "gpe/audit.hpp"
#include "gpe/config.hpp"
#include "gpe/core.hpp"
#include "gpe/errors.hpp"
#include "gpe/io.hpp"
#include "gpe/mds.hpp"
#include "gpe/optim.hpp"
#include "gpe/ot.hpp"
#include "gpe/parallel.hpp"
#include "gpe/quantile.hpp"
#include "gpe/vae.hpp"

namespace gpe {

namespace fs = std::filesystem;
using nlohmann::json;

std::string config_hash(const json& config) {
  const std::string text = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void log_line(std::ostream* out, const std::string& level, const std::string& event, json fields = json::object()) {
  if (out == nullptr) return;
  fields["level"] = level;
  fields["event"] = event;
  *out << fields.dump() << '\n';
  out->flush();
}

/// Output directory plus the list of files written into it.
class RunContext {
 public:
  RunContext(fs::path dir, std::uint64_t seed) : dir_(std::move(dir)), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  RngSeed derived(std::uint64_t stream) const { return RngSeed{mix_seed(seed_, stream)}; }

  fs::path file(const std::string& name) {
    if (std::find(outputs_.begin(), outputs_.end(), name) == outputs_.end()) outputs_.push_back(name);
    return dir_ / name;
  }
  void write_json(const std::string& name, json doc) {
    doc["schema"] = kSchemaVersion;
    gpe::write_json(file(name), doc);
  }
  const std::vector<std::string>& outputs() const { return outputs_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::uint64_t seed_;
  std::vector<std::string> outputs_;
};

using Runner = std::function<int(RunContext&)>;

json trace_summary(const TrainTrace& trace) {
  return {{"status", to_string(trace.status)},
          {"iterations", trace.records.empty() ? 0 : trace.records.back().iteration},
          {"final_cost", trace.final_cost()},
          {"initial_cost", trace.records.empty() ? 0.0 : trace.records.front().cost},
          {"beta_max", trace.beta_max}};
}

// ---------------------------------------------------------------- datasets

struct DatasetSpec {
  std::string kind = "gaussian-mixture";
  int components = 4;
  int ambient_dim = 500;
  int n = 300;
  double manifold_sigma = 0.15;
  double noise_sigma = 0.01;
  double length = 1.0;
  std::string distribution = "uniform";
  fs::path path;
  fs::path labels_path;
  std::optional<std::uint64_t> seed;
};

struct Dataset {
  PointCloud cloud;
  std::vector<int> labels;
  std::optional<SyntheticManifold> manifold;
  RowMatrix params;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

DatasetSpec parse_dataset(const ConfigTable& t, const DatasetSpec& defaults, bool needs_n = true) {
  DatasetSpec s = defaults;
  s.kind = t.get_string("kind", s.kind);
  s.seed = t.has("seed") ? std::optional<std::uint64_t>(t.get_u64("seed", 0)) : s.seed;
  if (s.kind == "file") {
    s.path = t.get_string("path");
    require(fs::exists(s.path), "dataset.path does not exist: " + s.path.string());
    if (t.has("labels")) {
      s.labels_path = t.get_string("labels");
      require(fs::exists(s.labels_path), "dataset.labels does not exist: " + s.labels_path.string());
    }
  } else if (s.kind == "gaussian-mixture") {
    s.components = static_cast<int>(t.get_int("components", s.components));
    s.ambient_dim = static_cast<int>(t.get_int("ambient_dim", s.ambient_dim));
    s.manifold_sigma = t.get_double("manifold_sigma", s.manifold_sigma);
    s.noise_sigma = t.get_double("noise_sigma", s.noise_sigma);
    require(s.components >= 1, "dataset.components must be >= 1");
    require(s.ambient_dim >= 2, "dataset.ambient_dim must be >= 2");
    require(s.manifold_sigma >= 0.0 && s.noise_sigma >= 0.0, "dataset sigmas must be nonnegative");
  } else if (s.kind == "circle" || s.kind == "swiss-roll") {
    s.ambient_dim = static_cast<int>(t.get_int("ambient_dim", s.ambient_dim));
    s.noise_sigma = t.get_double("noise_sigma", s.noise_sigma);
    require(s.ambient_dim >= (s.kind == "circle" ? 2 : 3), "dataset.ambient_dim too small for " + s.kind);
    require(s.noise_sigma >= 0.0, "dataset.noise_sigma must be nonnegative");
  } else if (s.kind == "line") {
    s.ambient_dim = 1;
    s.distribution = t.get_string("distribution", s.distribution);
    s.length = t.get_double("length", s.length);
    require(s.distribution == "uniform" || s.distribution == "normal", "dataset.distribution must be uniform or normal");
    require(s.length > 0.0, "dataset.length must be > 0");
  } else {
    throw ConfigError("dataset.kind must be one of gaussian-mixture, circle, swiss-roll, line, file");
  }
  if (s.kind != "file" && needs_n) {
    s.n = static_cast<int>(t.get_int("n", s.n));
    require(s.n >= 2 && s.n <= kMaxPairwisePoints,
            "dataset.n must lie in [2, " + std::to_string(kMaxPairwisePoints) + "]");
  }
  t.finish();
  return s;
}

std::vector<int> read_labels(const fs::path& path) {
  const RowMatrix m = read_matrix_csv(path);
  std::vector<int> labels(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) labels[i] = static_cast<int>(m(i, 0));
  return labels;
}

Dataset make_dataset(const DatasetSpec& s, RngSeed fallback_seed) {
  const RngSeed seed = s.seed ? RngSeed{*s.seed} : fallback_seed;
  Dataset d;
  if (s.kind == "file") {
    d.cloud = read_cloud(s.path);
    if (!s.labels_path.empty()) d.labels = read_labels(s.labels_path);
  } else if (s.kind == "gaussian-mixture") {
    MixtureSample m = generate_gaussian_mixture(s.components, s.ambient_dim, s.n, s.manifold_sigma,
                                                s.noise_sigma, seed);
    d.cloud = std::move(m.cloud);
    d.labels = std::move(m.labels);
  } else if (s.kind == "line") {
    Rng rng(seed);
    RowMatrix x(s.n, 1);
    // uniform on [0, length], or normal with standard deviation length
    for (int i = 0; i < s.n; ++i) x(i, 0) = s.length * (s.distribution == "normal" ? rng.normal() : rng.uniform());
    d.cloud = PointCloud(std::move(x));
  } else {
    ManifoldSample m = generate_synthetic_manifold(manifold_kind_from_string(s.kind), s.ambient_dim, s.n,
                                                   s.noise_sigma, seed);
    d.cloud = std::move(m.cloud);
    d.manifold = std::move(m.manifold);
    d.params = std::move(m.params);
  }
  return d;
}

CloudSampler make_sampler(const DatasetSpec& s) {
  if (s.kind == "gaussian-mixture")
    return mixture_sampler(s.components, s.ambient_dim, s.manifold_sigma, s.noise_sigma);
  if (s.kind == "circle" || s.kind == "swiss-roll")
    return manifold_sampler(SyntheticManifold(manifold_kind_from_string(s.kind), s.ambient_dim), s.noise_sigma);
  throw ConfigError("sampler.kind must be gaussian-mixture, circle or swiss-roll");
}

void write_labels(RunContext& ctx, const std::vector<int>& labels) {
  if (labels.empty()) return;
  RowMatrix m(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) m(i, 0) = labels[i];
  write_matrix_csv(ctx.file("labels.csv"), m);
}

// ------------------------------------------------------------ train configs

struct EncoderSpec {
  int latent_dim = 2;
  TrainConfig train;
};

TrainConfig parse_train(const ConfigTable& t, TrainConfig defaults, bool allow_auto) {
  TrainConfig c = std::move(defaults);
  if (t.has("mode")) {
    try {
      c.mode = encoder_mode_from_string(t.get_string("mode"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(t.path() + ".mode: " + e.what());
    }
  }
  if (t.has("step_size")) {
    const json& v = t.get_raw("step_size");
    if (v.is_string() && v.get<std::string>() == "auto") {
      require(allow_auto, t.path() + ".step_size: \"auto\" applies to encoder training only");
      c.step_size.reset();
    } else if (v.is_number()) {
      c.step_size = v.get<double>();
    } else {
      throw ConfigError(t.path() + ".step_size: expected a number or \"auto\"");
    }
  }
  if (!allow_auto) require(c.step_size.has_value(), t.path() + ".step_size: a numeric step is required");
  c.max_iters = static_cast<int>(t.get_int("max_iters", c.max_iters));
  c.tol = t.get_double("tol", c.tol);
  c.hidden = t.get_ints("hidden", c.hidden);
  c.slope = t.get_double("slope", c.slope);
  c.auto_period = static_cast<int>(t.get_int("auto_period", c.auto_period));
  c.divergence_window = static_cast<int>(t.get_int("divergence_window", c.divergence_window));
  if (t.has("seed")) c.seed = RngSeed{t.get_u64("seed", 0)};
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(t.path() + ": " + e.what());
  }
  return c;
}

EncoderSpec parse_encoder(const ConfigTable& t, TrainConfig defaults) {
  EncoderSpec s;
  s.latent_dim = static_cast<int>(t.get_int("latent_dim", s.latent_dim));
  require(s.latent_dim >= 1, "encoder.latent_dim must be >= 1");
  s.train = parse_train(t, std::move(defaults), true);
  t.finish();
  return s;
}

TrainConfig encoder_defaults(RngSeed seed) {
  TrainConfig c;
  c.mode = EncoderMode::Table;
  c.max_iters = 1000;
  c.seed = seed;
  return c;
}

TrainConfig decoder_defaults(RngSeed seed) {
  TrainConfig c;
  c.step_size = 0.02;
  c.max_iters = 3000;
  c.seed = seed;
  return c;
}

json descent_json(const DescentCheck& d, bool applies) {
  return {{"applies", applies},
          {"grad_norm_sq_sum", d.grad_sum},
          {"bound", d.bound},
          {"telescoping_holds", d.telescoping_holds},
          {"monotone", d.monotone},
          {"max_increase", d.max_increase}};
}

/// The descent guarantee covers table-mode runs with the corollary step.
bool descent_applies(const TrainConfig& c) { return c.mode == EncoderMode::Table && !c.step_size; }

// ------------------------------------------------------------ run inputs

struct InputSpec {
  fs::path points;
  fs::path codes;
  fs::path labels;
};

InputSpec parse_input(const ConfigTable& t) {
  InputSpec s;
  if (t.has("encoder_run")) {
    const fs::path dir = t.get_string("encoder_run");
    s.points = dir / "points.bin";
    s.codes = dir / "codes.csv";
    if (fs::exists(dir / "labels.csv")) s.labels = dir / "labels.csv";
  } else {
    s.points = t.get_string("points");
    s.codes = t.get_string("codes");
  }
  require(fs::exists(s.points), "input points file does not exist: " + s.points.string());
  require(fs::exists(s.codes), "input codes file does not exist: " + s.codes.string());
  t.finish();
  return s;
}

// ------------------------------------------------------------ experiments

Runner parse_encoder_train(const ConfigTable& root, RngSeed seed) {
  const DatasetSpec data = parse_dataset(root.table_or_empty("dataset"), {});
  const EncoderSpec enc = parse_encoder(root.table_or_empty("encoder"), encoder_defaults(RngSeed{mix_seed(seed.value, 2)}));
  return [=](RunContext& ctx) {
    const Dataset d = make_dataset(data, ctx.derived(1));
    const EncoderResult r = train_encoder(d.cloud, enc.latent_dim, enc.train);
    write_cloud_binary(ctx.file("points.bin"), d.cloud);
    write_labels(ctx, d.labels);
    write_matrix_csv(ctx.file("codes.csv"), r.codes.codes());
    if (r.mlp) write_mlp_json(ctx.file("encoder.json"), *r.mlp);
    write_trace_csv(ctx.file("trace.csv"), r.trace);
    const bool applies = descent_applies(enc.train);
    const DescentCheck check = check_descent(r.trace);
    const BilipEstimate b = estimate_bilip(d.cloud, r.codes);
    json rep = trace_summary(r.trace);
    rep["mode"] = to_string(enc.train.mode);
    rep["latent_dim"] = enc.latent_dim;
    rep["step_size"] = enc.train.step_size ? json(*enc.train.step_size) : json("auto");
    rep["descent"] = descent_json(check, applies);
    rep["alpha_hat"] = b.alpha_hat;
    ctx.write_json("encoder_report.json", rep);
    if (r.trace.status == TrainStatus::Diverged) return int(kExitDiverged);
    if (applies && (!check.telescoping_holds || !check.monotone)) return int(kExitAssertion);
    return int(kExitOk);
  };
}

Runner parse_decoder_train(const ConfigTable& root, RngSeed seed) {
  const InputSpec in = parse_input(root.table("input"));
  const ConfigTable dt = root.table_or_empty("decoder");
  const TrainConfig train = parse_train(dt, decoder_defaults(RngSeed{mix_seed(seed.value, 3)}), false);
  dt.finish();
  return [=](RunContext& ctx) {
    const PointCloud cloud = read_cloud(in.points);
    const EmbeddingTable codes(read_matrix_csv(in.codes));
    const DecoderResult r = train_decoder(cloud, codes, train);
    write_mlp_json(ctx.file("decoder.json"), r.decoder);
    write_trace_csv(ctx.file("trace.csv"), r.trace);
    json rep = trace_summary(r.trace);
    rep["reconstruction_p1"] = reconstruction_loss(cloud, codes, r.decoder, 1.0);
    rep["reconstruction_p2"] = reconstruction_loss(cloud, codes, r.decoder, 2.0);
    ctx.write_json("decoder_report.json", rep);
    return r.trace.status == TrainStatus::Diverged ? int(kExitDiverged) : int(kExitOk);
  };
}

json audit_json(const BilipAuditReport& a) {
  json alphas = json::array(), sep = json::array();
  for (const auto& r : a.alphas)
    alphas.push_back({{"alpha", r.alpha},
                      {"violating_fraction", r.violating_fraction},
                      {"markov_bound", r.markov_bound},
                      {"bound_satisfied", r.bound_satisfied}});
  for (const auto& s : a.separated)
    sep.push_back({{"alpha", s.alpha},
                   {"gamma", s.gamma},
                   {"threshold", s.threshold},
                   {"qualifying_pairs", s.qualifying_pairs},
                   {"ratio_min", s.qualifying_pairs ? json(s.ratio_min) : json(nullptr)},
                   {"ratio_max", s.qualifying_pairs ? json(s.ratio_max) : json(nullptr)},
                   {"lower_bound", s.lower_bound},
                   {"upper_bound", s.upper_bound},
                   {"implication_failures", s.implication_failures}});
  return {{"epsilon_gme", a.epsilon_gme}, {"ordered_pairs", a.ordered_pairs}, {"alphas", alphas}, {"separated", sep}};
}

Runner parse_audit(const ConfigTable& root, RngSeed) {
  const InputSpec in = parse_input(root.table("input"));
  const ConfigTable at = root.table_or_empty("audit");
  const std::vector<double> alphas = at.get_doubles("alphas", {1.05, 1.1, 1.5, 2.0});
  const double gamma = at.get_double("gamma", 0.5);
  at.finish();
  for (double a : alphas) require(a > 1.0, "audit.alphas must all exceed 1");
  require(gamma > 0.0 && gamma < 1.0, "audit.gamma must lie in (0, 1)");
  return [=](RunContext& ctx) {
    const PointCloud cloud = read_cloud(in.points);
    const EmbeddingTable codes(read_matrix_csv(in.codes));
    const BilipAuditReport a = weak_bilip_audit(cloud, codes, alphas, gamma);
    json rep = audit_json(a);
    const BilipEstimate b = estimate_bilip(cloud, codes);
    rep["alpha_hat"] = b.alpha_hat;
    ctx.write_json("audit.json", rep);
    return a.all_bounds_satisfied() ? int(kExitOk) : int(kExitAssertion);
  };
}

json probe_json(const HessianProbeReport& r) {
  return {{"kind", to_string(r.kind)},
          {"max_rayleigh", r.max_rayleigh},
          {"min_rayleigh", r.min_rayleigh},
          {"beta_hat", r.beta_hat},
          {"gme_ceiling", r.gme_ceiling},
          {"probes", r.probes},
          {"power_iterations", r.power_iterations},
          {"ceiling_violations", r.ceiling_violations}};
}

Runner parse_hessian_probe(const ConfigTable& root, RngSeed) {
  DatasetSpec dflt;
  dflt.kind = "line";
  dflt.n = 64;
  const DatasetSpec data = parse_dataset(root.table_or_empty("dataset"), dflt);
  const ConfigTable pt = root.table_or_empty("probe");
  const std::string map = pt.get_string("map", "scale");
  const double scale = pt.get_double("scale", 10.0);
  const int probes = static_cast<int>(pt.get_int("n_probes", 64));
  const int power = static_cast<int>(pt.get_int("power_iterations", 200));
  pt.finish();
  require(map == "scale" || map == "identity", "probe.map must be scale or identity");
  require(probes >= 32, "probe.n_probes must be >= 32");
  require(power >= 1, "probe.power_iterations must be >= 1");
  return [=](RunContext& ctx) {
    const Dataset d = make_dataset(data, ctx.derived(1));
    const EmbeddingTable codes(map == "identity" ? d.cloud.points() : RowMatrix(scale * d.cloud.points()));
    const HessianProbeReport g = hessian_bound_probe(CostKind::Gme, d.cloud, codes, probes, ctx.derived(5), power);
    const HessianProbeReport m = hessian_bound_probe(CostKind::Mds, d.cloud, codes, probes, ctx.derived(5), power);
    ctx.write_json("hessian_probe.json", {{"gme", probe_json(g)},
                                          {"mds", probe_json(m)},
                                          {"mds_over_gme", m.max_rayleigh / g.max_rayleigh}});
    return g.ceiling_violations == 0 ? int(kExitOk) : int(kExitAssertion);
  };
}

Runner parse_concentration(const ConfigTable& root, RngSeed seed) {
  const ConfigTable st = root.table_or_empty("sampler");
  const DatasetSpec sampler = parse_dataset(st, {}, false);
  require(sampler.kind != "file" && sampler.kind != "line", "sampler.kind must be gaussian-mixture, circle or swiss-roll");
  const ConfigTable mt = root.table_or_empty("map");
  const std::string map_kind = mt.get_string("kind", "train");
  const double scale = mt.get_double("scale", 1.0);
  fs::path mlp_path;
  int n_train = 0;
  if (map_kind == "mlp") {
    mlp_path = mt.get_string("path");
    require(fs::exists(mlp_path), "map.path does not exist: " + mlp_path.string());
  } else if (map_kind == "train") {
    n_train = static_cast<int>(mt.get_int("n_train", 200));
    require(n_train >= 2 && n_train <= kMaxPairwisePoints, "map.n_train out of range");
  } else {
    require(map_kind == "identity" || map_kind == "scale", "map.kind must be identity, scale, mlp or train");
  }
  mt.finish();
  TrainConfig enc_defaults = encoder_defaults(RngSeed{mix_seed(seed.value, 2)});
  enc_defaults.mode = EncoderMode::Mlp;
  enc_defaults.step_size = 0.5;
  enc_defaults.max_iters = 2000;
  const EncoderSpec enc = parse_encoder(root.table_or_empty("encoder"), enc_defaults);
  require(map_kind != "train" || enc.train.mode == EncoderMode::Mlp, "concentration needs an mlp encoder");
  const ConfigTable ct = root.table_or_empty("concentration");
  const std::vector<int> sizes = ct.get_ints("sizes", {50, 100, 200});
  const std::vector<double> eps = ct.get_doubles("epsilons", {0.3, 0.5});
  const int trials = static_cast<int>(ct.get_int("trials", 1000));
  ct.finish();
  require(trials >= 100, "concentration.trials must be >= 100");
  for (int n : sizes) require(n >= 2, "concentration.sizes must be >= 2");
  for (double e : eps) require(e > 0.0, "concentration.epsilons must be > 0");

  return [=](RunContext& ctx) {
    const CloudSampler draw = make_sampler(sampler);
    BatchMap map;
    json map_info = {{"kind", map_kind}};
    if (map_kind == "identity") {
      map = scaling_map(1.0);
    } else if (map_kind == "scale") {
      map = scaling_map(scale);
      map_info["scale"] = scale;
    } else {
      std::optional<MlpMap> mlp;
      if (map_kind == "mlp") {
        mlp = read_mlp_json(mlp_path);
      } else {
        Rng rng(ctx.derived(6));
        const PointCloud train_cloud(draw(n_train, rng));
        const EncoderResult r = train_encoder(train_cloud, enc.latent_dim, enc.train);
        if (r.trace.status == TrainStatus::Diverged) throw DivergenceError("encoder training diverged");
        mlp = *r.mlp;
        write_trace_csv(ctx.file("encoder_trace.csv"), r.trace);
        write_mlp_json(ctx.file("encoder.json"), *mlp);
        map_info["encoder"] = trace_summary(r.trace);
      }
      map = as_batch_map(*mlp);
    }
    const ConcentrationReport rep = concentration_mc(draw, map, sizes, eps, trials, ctx.derived(7));
    json records = json::array();
    bool ok = true;
    for (const auto& r : rep.records) {
      records.push_back({{"n", r.n},
                         {"epsilon", r.epsilon},
                         {"threshold", r.threshold},
                         {"exceedance", r.exceedance},
                         {"bound", r.bound},
                         {"slack", r.slack},
                         {"within_bound", r.within_bound}});
      ok = ok && r.within_bound;
    }
    ctx.write_json("concentration.json", {{"map", map_info},
                                          {"trials", rep.trials},
                                          {"reference_size", rep.reference_size},
                                          {"reference_cost", rep.reference_cost},
                                          {"beta_hat", rep.beta_hat},
                                          {"records", records}});
    return ok ? int(kExitOk) : int(kExitAssertion);
  };
}

Runner parse_pipeline(const ConfigTable& root, RngSeed seed) {
  const DatasetSpec data = parse_dataset(root.table_or_empty("dataset"), {});
  const EncoderSpec enc = parse_encoder(root.table_or_empty("encoder"), encoder_defaults(RngSeed{mix_seed(seed.value, 2)}));
  const ConfigTable dt = root.table_or_empty("decoder");
  const TrainConfig dec = parse_train(dt, decoder_defaults(RngSeed{mix_seed(seed.value, 3)}), false);
  dt.finish();
  const ConfigTable pt = root.table_or_empty("pipeline");
  const std::vector<double> ps = pt.get_doubles("p", {1.0, 2.0});
  const int latent_samples = static_cast<int>(pt.get_int("latent_samples", 0));
  OtLimits limits;
  limits.max_assignment = pt.get_int("max_assignment", limits.max_assignment);
  pt.finish();
  for (double p : ps) require(p >= 1.0, "pipeline.p values must be >= 1");
  require(latent_samples >= 0, "pipeline.latent_samples must be >= 0");

  return [=](RunContext& ctx) {
    const Dataset d = make_dataset(data, ctx.derived(1));
    const EncoderResult er = train_encoder(d.cloud, enc.latent_dim, enc.train);
    write_trace_csv(ctx.file("encoder_trace.csv"), er.trace);
    write_matrix_csv(ctx.file("codes.csv"), er.codes.codes());
    if (er.trace.status == TrainStatus::Diverged) throw DivergenceError("encoder training diverged");
    const DecoderResult dr = train_decoder(d.cloud, er.codes, dec);
    write_trace_csv(ctx.file("decoder_trace.csv"), dr.trace);
    write_mlp_json(ctx.file("decoder.json"), dr.decoder);
    if (dr.trace.status == TrainStatus::Diverged) throw DivergenceError("decoder training diverged");

    const Eigen::Index n = d.cloud.size();
    const Eigen::Index k = latent_samples > 0 ? latent_samples : n;
    Rng rng(ctx.derived(8));
    const RowMatrix z_fit = rng.normal_matrix(n, enc.latent_dim);
    const RowMatrix z_fresh = rng.normal_matrix(k, enc.latent_dim);
    json records = json::array();
    for (double p : ps) {
      const FlowFit fit = fit_flow_map(z_fit, er.codes.codes(), p, limits);
      const HoldoutReport hold = holdout_epsilon_dif(fit.flow, z_fresh, p, limits);
      const PipelineReport rep = pipeline_eval(d.cloud, er.codes, as_batch_map(dr.decoder), fit.flow, z_fresh, p, limits);
      records.push_back({{"p", p},
                         {"wasserstein", rep.wasserstein},
                         {"epsilon_dif", rep.epsilon_dif},
                         {"epsilon_dif_fit", fit.epsilon_dif},
                         {"holdout_prior_gap", hold.prior_gap},
                         {"epsilon_rec", rep.epsilon_rec},
                         {"alpha_hat", rep.alpha_hat},
                         {"decomposition_lhs", rep.decomposition_lhs},
                         {"decomposition_rhs", rep.decomposition_rhs},
                         {"holds", rep.holds}});
    }
    ctx.write_json("pipeline.json", {{"encoder", trace_summary(er.trace)},
                                     {"decoder", trace_summary(dr.trace)},
                                     {"latent_samples", k},
                                     {"records", records}});
    return int(kExitOk);
  };
}

Runner parse_quantile_demo(const ConfigTable& root, RngSeed) {
  const ConfigTable qt = root.table_or_empty("quantile");
  const double m = qt.get_double("m", 1.0);
  const double sigma = qt.get_double("sigma", 0.15);
  QuantileGrid grid;
  grid.points = static_cast<int>(qt.get_int("points", grid.points));
  grid.half_width_sigmas = qt.get_double("half_width_sigmas", grid.half_width_sigmas);
  const int samples = static_cast<int>(qt.get_int("samples", 100000));
  const bool dump = qt.get_bool("dump_map", true);
  qt.finish();
  require(m > 0.0 && sigma > 0.0, "quantile.m and quantile.sigma must be > 0");
  require(grid.points >= 3 && grid.points % 2 == 1, "quantile.points must be odd and >= 3");
  require(samples >= 1, "quantile.samples must be >= 1");
  return [=](RunContext& ctx) {
    const QuantileMap1D map(m, sigma, grid);
    const QuantileDiagnostics q = quantile_diagnostics(map, samples, ctx.derived(9));
    if (dump) {
      RowMatrix table(map.nodes().size(), 2);
      for (std::size_t i = 0; i < map.nodes().size(); ++i) {
        table(i, 0) = map.nodes()[i];
        table(i, 1) = map.values()[i];
      }
      write_matrix_csv(ctx.file("quantile_map.csv"), table);
    }
    ctx.write_json("quantile.json", {{"m", m},
                                     {"sigma", sigma},
                                     {"grid_points", grid.points},
                                     {"t_at_zero", q.t_at_zero},
                                     {"t_prime_zero", q.t_prime_zero},
                                     {"approximation", q.approximation},
                                     {"ratio", q.ratio},
                                     {"ks_distance", q.ks_distance},
                                     {"samples", q.samples},
                                     {"monotone", q.monotone}});
    return int(kExitOk);
  };
}

Runner parse_jl_chart(const ConfigTable& root, RngSeed) {
  const ConfigTable mt = root.table_or_empty("manifold");
  const std::string kind = mt.get_string("kind", "circle");
  const int dim = static_cast<int>(mt.get_int("ambient_dim", 64));
  mt.finish();
  require(kind == "circle" || kind == "swiss-roll", "manifold.kind must be circle or swiss-roll");
  require(dim >= (kind == "circle" ? 2 : 3), "manifold.ambient_dim too small");
  const ConfigTable jt = root.table_or_empty("jl");
  const int charts = static_cast<int>(jt.get_int("charts", 8));
  const double erosion = jt.get_double("erosion", 0.05);
  const int latent = static_cast<int>(jt.get_int("latent_dim", 16));
  const double eps_jl = jt.get_double("eps_jl", 0.3);
  const int n = static_cast<int>(jt.get_int("n", 400));
  jt.finish();
  require(charts >= 1, "jl.charts must be >= 1");
  require(erosion >= 0.0, "jl.erosion must be >= 0");
  require(eps_jl > 0.0 && eps_jl < 1.0, "jl.eps_jl must lie in (0, 1)");
  require(n >= 2 && n <= kMaxPairwisePoints, "jl.n out of range");
  return [=](RunContext& ctx) {
    const SyntheticManifold manifold(manifold_kind_from_string(kind), dim);
    const JlChartMap map = construct_chart_jl_map(manifold, charts, erosion, latent, eps_jl, ctx.derived(10));
    Rng rng(ctx.derived(11));
    const RowMatrix params = sample_params(manifold, n, rng);
    const JlChartAudit a = audit_chart_jl_map(map, params, eps_jl);
    ctx.write_json("jl_chart.json", {{"kind", kind},
                                     {"charts", charts},
                                     {"latent_dim", latent},
                                     {"eps_jl", eps_jl},
                                     {"projection_attempts", map.attempts()},
                                     {"epsilon_chart", a.epsilon_chart},
                                     {"epsilon_band", a.epsilon_band},
                                     {"band", {a.band_lower, a.band_upper}},
                                     {"eroded_points", a.eroded_points},
                                     {"in_chart_pairs", a.in_chart_pairs},
                                     {"cross_chart_pairs", a.cross_chart_pairs},
                                     {"in_chart_ratio", {a.in_chart_min, a.in_chart_max}},
                                     {"cross_chart_ratio", {a.cross_chart_min, a.cross_chart_max}},
                                     {"in_chart_band_fraction", a.in_chart_band_fraction},
                                     {"cross_chart_band_fraction", a.cross_chart_band_fraction},
                                     {"band_fraction", a.band_fraction}});
    return int(kExitOk);
  };
}

Runner parse_toy_compare(const ConfigTable& root, RngSeed seed) {
  const DatasetSpec data = parse_dataset(root.table_or_empty("dataset"), {});
  const EncoderSpec enc = parse_encoder(root.table_or_empty("encoder"), encoder_defaults(RngSeed{mix_seed(seed.value, 2)}));
  const ConfigTable vt = root.table_or_empty("vae");
  const double beta = vt.get_double("beta", 0.1);
  TrainConfig vdefaults;
  vdefaults.step_size = 0.01;
  vdefaults.max_iters = 1000;
  vdefaults.hidden = {64, 64};
  vdefaults.seed = RngSeed{mix_seed(seed.value, 12)};
  const TrainConfig vae = parse_train(vt, vdefaults, false);
  vt.finish();
  require(beta >= 0.0, "vae.beta must be >= 0");
  return [=](RunContext& ctx) {
    const Dataset d = make_dataset(data, ctx.derived(1));
    const EncoderResult g = train_encoder(d.cloud, enc.latent_dim, enc.train);
    write_trace_csv(ctx.file("gpe_trace.csv"), g.trace);
    write_matrix_csv(ctx.file("gpe_embedding.csv"), g.codes.codes());
    const VaeTrainResult v = vae_train(d.cloud, enc.latent_dim, beta, vae);
    write_trace_csv(ctx.file("vae_trace.csv"), v.trace);
    const RowMatrix vcodes = v.model.mean(d.cloud.points());
    write_matrix_csv(ctx.file("vae_embedding.csv"), vcodes);
    write_labels(ctx, d.labels);
    const StressComparison s = stress_compare(d.cloud, g.codes.codes(), vcodes);
    json rep = {{"stress_gpe", s.stress_a},
                {"stress_vae", s.stress_b},
                {"gme_cost_gpe", g.trace.final_cost()},
                {"gme_cost_vae", GmeObjective(d.cloud).cost(vcodes)},
                {"gpe", trace_summary(g.trace)},
                {"vae", trace_summary(v.trace)},
                {"vae_reconstruction", vae_reconstruction(v.model, d.cloud)},
                {"beta", beta}};
    if (d.labels.size() == static_cast<std::size_t>(d.cloud.size())) {
      rep["center_spread_gpe"] = cluster_center_spread(g.codes.codes(), d.labels);
      rep["center_spread_vae"] = cluster_center_spread(vcodes, d.labels);
    }
    ctx.write_json("toy_compare.json", rep);
    if (g.trace.status == TrainStatus::Diverged || v.trace.status == TrainStatus::Diverged)
      return int(kExitDiverged);
    return int(kExitOk);
  };
}

Runner parse_kind(const std::string& kind, const ConfigTable& root, RngSeed seed) {
  if (kind == "toy-compare") return parse_toy_compare(root, seed);
  if (kind == "encoder-train") return parse_encoder_train(root, seed);
  if (kind == "decoder-train") return parse_decoder_train(root, seed);
  if (kind == "audit") return parse_audit(root, seed);
  if (kind == "hessian-probe") return parse_hessian_probe(root, seed);
  if (kind == "concentration") return parse_concentration(root, seed);
  if (kind == "pipeline") return parse_pipeline(root, seed);
  if (kind == "quantile-demo") return parse_quantile_demo(root, seed);
  if (kind == "jl-chart") return parse_jl_chart(root, seed);
  throw ConfigError("unknown experiment kind: " + kind);
}

fs::path default_output_dir(const fs::path& config) {
  const char* env = std::getenv(kOutputRootEnv);
  const fs::path root = env != nullptr && *env != '\0' ? fs::path(env) : fs::path("runs");
  return root / config.stem();
}

const char* status_name(int code) {
  switch (code) {
    case kExitOk: return "ok";
    case kExitDiverged: return "diverged";
    case kExitAssertion: return "assertion-failed";
    default: return "failed";
  }
}

}  // namespace

int run_experiment(const RunOptions& options) {
  std::ostream* log = options.log;
  json config;
  Runner runner;
  fs::path out_dir;
  std::string kind;
  std::uint64_t seed = 0;
  try {
    config = parse_config_file(options.config);
    if (options.seed) config["seed"] = *options.seed;
    if (options.out) config["output_dir"] = options.out->string();
    const ConfigTable root(config, "");
    kind = root.get_string("kind");
    seed = root.get_u64("seed", 0);
    out_dir = root.has("output_dir") ? fs::path(root.get_string("output_dir")) : default_output_dir(options.config);
    try {
      runner = parse_kind(kind, root, RngSeed{seed});
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    root.finish();
  } catch (const ConfigError& e) {
    log_line(log, "error", "config_error", {{"config", options.config.string()}, {"message", e.what()}});
    return kExitConfigError;
  } catch (const nlohmann::json::exception& e) {
    log_line(log, "error", "config_error", {{"config", options.config.string()}, {"message", e.what()}});
    return kExitConfigError;
  }

  if (options.threads) set_thread_cap(std::max(1u, *options.threads));
  const std::string started = utc_now();
  log_line(log, "info", "run_start", {{"kind", kind}, {"output_dir", out_dir.string()}, {"seed", seed}});

  RunContext ctx(out_dir, seed);
  int code = kExitOk;
  std::string message;
  try {
    fs::create_directories(out_dir);
    // drop a stale manifest so an interrupted rerun is detectable
    fs::remove(out_dir / "manifest.json");
    code = runner(ctx);
  } catch (const InvariantViolation& e) {
    code = kExitAssertion;
    message = e.what();
  } catch (const DivergenceError& e) {
    code = kExitDiverged;
    message = e.what();
  } catch (const std::exception& e) {
    code = kExitFailure;
    message = e.what();
  }
  if (code != kExitOk)
    log_line(log, "error", status_name(code), {{"kind", kind}, {"exit_code", code}, {"message", message}});

  std::vector<std::string> outputs = ctx.outputs();
  std::sort(outputs.begin(), outputs.end());
  json manifest = {{"schema", kSchemaVersion},
                   {"kind", kind},
                   {"config_hash", config_hash(config)},
                   {"code_version", kCodeVersion},
                   {"seed", seed},
                   {"started_at", started},
                   {"finished_at", utc_now()},
                   {"outputs", outputs},
                   {"status", status_name(code)},
                   {"exit_code", code}};
  if (!message.empty()) manifest["message"] = message;
  try {
    write_json(out_dir / "manifest.json", manifest);
  } catch (const std::exception& e) {
    log_line(log, "error", "manifest_write_failed", {{"message", e.what()}});
    return kExitFailure;
  }
  log_line(log, "info", "run_end", {{"kind", kind}, {"status", status_name(code)}, {"exit_code", code}});
  return code;
}

}  // namespace gpe
