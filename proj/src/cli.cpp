#include "genbench/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "genbench/binary_io.hpp"
#include "genbench/checkpoint.hpp"
#include "genbench/datasets.hpp"
#include "genbench/error.hpp"
#include "genbench/harness.hpp"
#include "genbench/oracle.hpp"
#include "genbench/parallel.hpp"
#include "genbench/rng.hpp"

namespace genbench {

namespace {

struct KeySpec {
  std::string key;
  std::string help;
};

const std::vector<KeySpec> kTrainingKeys = {
    {"mode", "paper (AdamW per the tables) or theorem (plain full-batch GD, linear only)"},
    {"optimizer", "adamw or gd"},
    {"lr_schedule", "linear, step or constant"},
    {"lr_start", "initial learning rate"},
    {"lr_end", "final learning rate"},
    {"lr_step_every", "step schedule: steps between decays"},
    {"lr_factor", "step schedule: decay factor"},
    {"weight_decay", "AdamW decoupled weight decay"},
    {"batch_size", "mini-batch size, 0 for full batch"},
    {"epochs", "training budget in epochs"},
    {"steps", "training budget in optimizer steps"},
    {"init", "zeros or fan-in"},
    {"hidden", "hidden width, 0 for the model default"},
    {"q", "stencil order for the fd model (2 or 4)"},
    {"output_bias", "DeepONet scalar output bias (true/false)"},
    {"eval_every", "epochs between full train-set evaluations"},
    {"select_best", "return the best-epoch parameters (true/false)"},
};

struct CommandSpec {
  std::string name;
  std::string help;
  std::vector<KeySpec> keys;
  std::map<std::string, std::string> defaults;
  bool trains = false;
};

const std::vector<CommandSpec>& commands() {
  static const std::vector<CommandSpec> specs = {
      {"gen",
       "generate datasets",
       {{"family", "family name (poly, sine, cos, fem), descriptor list (poly3,sine2) or all"},
        {"p", "order for a plain family name"},
        {"n_grid", "grid intervals"},
        {"n", "samples per dataset"},
        {"seed", "dataset seed"},
        {"k", "diffusion coefficient"},
        {"out", "output directory"}},
       {{"family", "all"}, {"p", ""}, {"n_grid", "22"}, {"n", "1000"}, {"seed", "0"}, {"k", "1"}},
       false},
      {"train",
       "train one model on one dataset",
       {{"model", "fd, linear, deeplinear, mlp or deeponet"},
        {"data", "dataset directory"},
        {"seed", "training seed"},
        {"out", "checkpoint directory"}},
       {{"model", "linear"}, {"seed", "0"}},
       true},
      {"crosseval",
       "train on every family and evaluate on every family",
       {{"model", "fd, linear, deeplinear, mlp or deeponet"},
        {"families", "descriptor list or all"},
        {"n_grid", "grid intervals"},
        {"n", "samples per dataset"},
        {"data_seed", "dataset seed"},
        {"data", "directory of datasets written by gen (one subdirectory per family)"},
        {"seeds", "training seeds, e.g. 0,1,2,3,4 or 0..4"},
        {"wiggle", "allowed test/train ratio for contained subspaces"},
        {"out", "output directory"}},
       {{"model", "linear"},
        {"families", "all"},
        {"n_grid", "22"},
        {"n", "1000"},
        {"data_seed", "0"},
        {"data", ""},
        {"seeds", "0,1,2,3,4"},
        {"wiggle", "10"}},
       true},
      {"probe",
       "one-hot probe of a trained model",
       {{"ckpt", "checkpoint directory"},
        {"reference", "hat or constant interpolation basis for the reference operator"},
        {"k", "diffusion coefficient of the reference operator"},
        {"out", "output directory"}},
       {{"reference", "hat"}, {"k", "1"}},
       false},
      {"sweep",
       "stencil fits across grid sizes and orders",
       {{"model", "only fd is supported"},
        {"q", "stencil orders, e.g. 2,4"},
        {"grids", "grid sizes, e.g. 8,16,32,64"},
        {"p", "polynomial orders, e.g. 1..8"},
        {"n", "samples per dataset"},
        {"data_seed", "dataset seed"},
        {"k", "diffusion coefficient"},
        {"out", "output directory"}},
       {{"model", "fd"}, {"q", "2,4"}, {"grids", "8,16,32,64"}, {"p", "1..8"}, {"n", "1000"},
        {"data_seed", "0"}, {"k", "1"}},
       false},
      {"theory",
       "compare trained models with predicted optima",
       {{"p", "polynomial orders, e.g. 1..8"},
        {"n_grid", "grid intervals"},
        {"q", "stencil order"},
        {"n", "samples per dataset"},
        {"data_seed", "dataset seed"},
        {"gd_steps", "plain GD steps for the linear model"},
        {"k", "diffusion coefficient"},
        {"out", "output directory"}},
       {{"p", "1..8"}, {"n_grid", "22"}, {"q", "2"}, {"n", "1000"}, {"data_seed", "0"},
        {"gd_steps", "3000000"}, {"k", "1"}},
       false},
  };
  return specs;
}

const CommandSpec& command_spec(const std::string& name) {
  for (const auto& c : commands())
    if (c.name == name) return c;
  throw Error(ErrorKind::Usage, "unknown subcommand '" + name + "'");
}

std::string flag_name(const std::string& key) {
  std::string f = "--" + key;
  std::replace(f.begin(), f.end(), '_', '-');
  return f;
}

[[noreturn]] void usage(const std::string& what) { throw Error(ErrorKind::Usage, what); }

std::int64_t as_int(const KeyValue& kv, const std::string& key) {
  const auto v = parse_int(kv.get(key));
  if (!v) usage("--" + key + " expects an integer, got '" + kv.get(key) + "'");
  return *v;
}

std::uint64_t as_uint(const KeyValue& kv, const std::string& key) {
  const auto v = as_int(kv, key);
  if (v < 0) usage("--" + key + " must be non-negative");
  return static_cast<std::uint64_t>(v);
}

double as_double(const KeyValue& kv, const std::string& key) {
  const auto v = parse_double(kv.get(key));
  if (!v) usage("--" + key + " expects a number, got '" + kv.get(key) + "'");
  return *v;
}

bool as_bool(const KeyValue& kv, const std::string& key) {
  const std::string& v = kv.get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  usage("--" + key + " expects true or false, got '" + v + "'");
}

ModelKind as_model(const KeyValue& kv) {
  const auto k = parse_model_kind(kv.get("model"));
  if (!k) usage("unknown model '" + kv.get("model") + "'");
  return *k;
}

int as_n_grid(const KeyValue& kv, const std::string& key = "n_grid") {
  const auto n = as_int(kv, key);
  if (n < 2 || n > 100000) usage("--" + key + " must be at least 2, got " + std::to_string(n));
  return static_cast<int>(n);
}

std::size_t as_samples(const KeyValue& kv) {
  const auto n = as_int(kv, "n");
  if (n < 1) usage("--n must be positive");
  return static_cast<std::size_t>(n);
}

double as_k(const KeyValue& kv) {
  const double k = as_double(kv, "k");
  if (!(k > 0.0)) usage("--k must be positive");
  return k;
}

std::filesystem::path as_out(const KeyValue& kv) {
  const auto v = kv.find("out");
  if (!v || v->empty()) usage("--out is required");
  return *v;
}

std::vector<FamilyDescriptor> parse_families(const std::string& text, const std::string& p_text) {
  std::vector<FamilyDescriptor> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    if (tok == "all") {
      for (const auto& d : standard_families()) out.push_back(d);
    } else if (auto d = parse_descriptor(tok)) {
      out.push_back(*d);
    } else if (auto f = parse_family(tok)) {
      if (*f == Family::FemPiecewiseLinear) {
        out.push_back({*f, 0});
      } else {
        if (p_text.empty()) usage("family '" + tok + "' needs --p");
        for (int p : parse_int_list(p_text)) {
          if (p < 1) usage("--p must be at least 1");
          out.push_back({*f, p});
        }
      }
    } else {
      usage("unknown family '" + tok + "'");
    }
  }
  if (out.empty()) usage("no families selected");
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = i + 1; j < out.size(); ++j)
      if (out[i] == out[j]) usage("family " + out[i].name() + " listed twice");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (int s : parse_int_list(text)) {
    if (s < 0) usage("seeds must be non-negative");
    out.push_back(static_cast<std::uint64_t>(s));
  }
  return out;
}

// Keys the training config is resolved into; the budget key depends on the unit.
void training_defaults(const TrainConfig& c, KeyValue& kv, bool budget_given) {
  kv.set("optimizer", optimizer_name(c.optimizer));
  kv.set("lr_schedule", schedule_name(c.lr.kind));
  kv.set("lr_start", c.lr.start);
  kv.set("lr_end", c.lr.end);
  kv.set("lr_step_every", static_cast<std::int64_t>(c.lr.step_every));
  kv.set("lr_factor", c.lr.factor);
  kv.set("weight_decay", c.weight_decay);
  kv.set("batch_size", c.batch_size);
  if (!budget_given)
    kv.set(c.unit == BudgetUnit::Epochs ? "epochs" : "steps", static_cast<std::int64_t>(c.budget));
  kv.set("init", init_scheme_name(c.init));
  kv.set("hidden", c.shape.hidden);
  kv.set("q", c.shape.stencil_q);
  kv.set("output_bias", c.shape.output_bias);
  kv.set("eval_every", c.eval_every);
  kv.set("select_best", c.select_best);
}

TrainConfig base_training_config(ModelKind kind, const std::string& mode) {
  if (mode == "paper") return default_train_config(kind);
  if (mode == "theorem") {
    if (kind != ModelKind::Linear) usage("--mode theorem applies to the linear model only");
    return theorem_mode_config(3'000'000);
  }
  usage("--mode must be paper or theorem, got '" + mode + "'");
}

KeyValue resolve(const CommandSpec& spec, const KeyValue& file, const KeyValue& flags) {
  auto pick = [&](const std::string& key) -> std::optional<std::string> {
    if (auto v = flags.find(key)) return v;
    if (auto v = file.find(key)) return v;
    return std::nullopt;
  };
  KeyValue out;
  for (const auto& [k, v] : spec.defaults) out.set(k, v);
  if (spec.trains) {
    const ModelKind kind = [&] {
      KeyValue tmp;
      tmp.set("model", pick("model").value_or(spec.defaults.at("model")));
      return as_model(tmp);
    }();
    const std::string mode = pick("mode").value_or("paper");
    out.set("mode", mode);
    const bool has_epochs = pick("epochs").has_value();
    const bool has_steps = pick("steps").has_value();
    if (flags.contains("epochs") && flags.contains("steps"))
      usage("--epochs and --steps are mutually exclusive");
    training_defaults(base_training_config(kind, mode), out, has_epochs || has_steps);
  }
  for (const auto& [k, v] : file.entries()) out.set(k, v);
  for (const auto& [k, v] : flags.entries()) out.set(k, v);
  // A flag budget in one unit replaces a file budget in the other.
  if (spec.trains && out.contains("epochs") && out.contains("steps")) {
    if (flags.contains("epochs") || flags.contains("steps")) {
      const std::string drop = flags.contains("epochs") ? "steps" : "epochs";
      KeyValue pruned;
      for (const auto& [k, v] : out.entries())
        if (k != drop) pruned.set(k, v);
      out = pruned;
    } else {
      usage("config file sets both epochs and steps");
    }
  }
  return out;
}

void write_run_manifest(const std::filesystem::path& dir, const RunConfig& rc) {
  KeyValue kv;
  kv.set("command", rc.command);
  kv.set("version", std::string(kVersion));
  kv.set("revision", std::string(kRevision));
  kv.set("rng", std::string(kRngName));
  kv.set("jobs", static_cast<std::int64_t>(rc.jobs));
  if (!rc.config_path.empty()) kv.set("config_file", rc.config_path.string());
  for (const auto& [k, v] : rc.resolved.entries()) kv.set(k, v);
  for (const auto& [k, v] : rc.from_file.entries()) kv.set("file." + k, v);
  for (const auto& [k, v] : rc.from_flags.entries()) kv.set("flag." + k, v);
  kv.write(dir / "run.manifest");
}

std::vector<Dataset> load_or_build(const FamilyGrid& grid, const std::string& data_dir, unsigned jobs) {
  if (data_dir.empty()) return build_datasets(grid, jobs);
  std::vector<Dataset> out(grid.families.size());
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    out[i] = read_dataset(std::filesystem::path(data_dir) / grid.families[i].name());
  });
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& d = grid.families[i];
    if (out[i].family != d.family || (d.family != Family::FemPiecewiseLinear && out[i].order_p != d.p))
      throw Error(ErrorKind::Io, "dataset in " + data_dir + "/" + d.name() + " is not " + d.name());
    if (out[i].grid.n_grid != grid.n_grid)
      throw Error(ErrorKind::Incompatible, "dataset " + d.name() + " has n_grid " +
                                               std::to_string(out[i].grid.n_grid) + ", expected " +
                                               std::to_string(grid.n_grid));
  }
  return out;
}

int run_gen(const RunConfig& rc, std::ostream& out) {
  const KeyValue& r = rc.resolved;
  const auto families = parse_families(r.get("family"), r.get("p"));
  const int n_grid = as_n_grid(r);
  const std::size_t n = as_samples(r);
  const std::uint64_t seed = as_uint(r, "seed");
  const double k = as_k(r);
  const auto dir = as_out(r);
  prepare_output_dir(dir, rc.force);
  write_run_manifest(dir, rc);
  const bool single = families.size() == 1;
  // A single dataset uses the seed as given; a set derives one seed per family
  // exactly as crosseval does, so `crosseval --data` reproduces its own datasets.
  parallel_for(families.size(), rc.jobs, [&](std::size_t i) {
    const auto& d = families[i];
    const std::uint64_t s = single ? seed : dataset_seed(seed, d);
    const Dataset ds = generate_dataset(d.family, d.p, n_grid, n, s, k);
    write_dataset(ds, single ? dir : dir / d.name());
  });
  out << "wrote " << families.size() << " dataset(s) to " << dir.string() << '\n';
  return 0;
}

int run_train(const RunConfig& rc, std::ostream& out) {
  const KeyValue& r = rc.resolved;
  const ModelKind kind = as_model(r);
  const auto data = r.find("data");
  if (!data || data->empty()) usage("--data is required");
  TrainConfig config = training_config_from(kind, r);
  const auto dir = as_out(r);
  const Dataset ds = read_dataset(*data);
  prepare_output_dir(dir, rc.force);
  write_run_manifest(dir, rc);
  const TrainResult res = train(kind, ds, config);
  write_checkpoint(dir, res.params, ds.grid.n_grid, config, res.history.final_mse);
  {
    std::ofstream h(dir / "history.csv", std::ios::binary);
    if (!h) throw Error(ErrorKind::Io, "cannot write history.csv");
    h << "epoch,train_mse\n";
    for (std::size_t i = 0; i < res.history.epoch_mse.size(); ++i)
      h << res.history.epoch_index[i] << ',' << format_double(res.history.epoch_mse[i]) << '\n';
    if (!h) throw Error(ErrorKind::Io, "error writing history.csv");
  }
  out << "model " << model_kind_name(kind) << ": train_mse " << format_double(res.history.final_mse)
      << " (best epoch " << res.history.best_epoch << ", " << res.history.steps << " steps, "
      << res.history.wall_seconds << " s)\n";
  return 0;
}

int run_crosseval(const RunConfig& rc, std::ostream& out) {
  const KeyValue& r = rc.resolved;
  const ModelKind kind = as_model(r);
  FamilyGrid grid;
  grid.families = parse_families(r.get("families"), "");
  grid.n_grid = as_n_grid(r);
  grid.n_samples = as_samples(r);
  grid.data_seed = as_uint(r, "data_seed");
  grid.seeds = parse_seeds(r.get("seeds"));
  const double wiggle = as_double(r, "wiggle");
  if (!(wiggle > 0.0)) usage("--wiggle must be positive");
  const TrainConfig config = training_config_from(kind, r);
  grid.validate();
  const auto dir = as_out(r);
  const auto datasets = load_or_build(grid, r.get("data"), rc.jobs);
  prepare_output_dir(dir, rc.force);
  write_run_manifest(dir, rc);
  const EvalGrid eg = cross_eval(kind, grid, datasets, config, rc.jobs);
  emit_report(eg, grid.families, dir, wiggle);
  out << "crosseval " << model_kind_name(kind) << ": " << eg.names.size() << " families, "
      << eg.runs.size() << " runs, output in " << dir.string() << '\n';
  if (!eg.failed_rows.empty()) {
    std::string rows;
    for (auto i : eg.failed_rows) rows += " " + eg.names[i];
    throw Error(ErrorKind::AllRunsDiverged, "every run diverged for:" + rows);
  }
  return 0;
}

int run_probe(const RunConfig& rc, std::ostream& out) {
  const KeyValue& r = rc.resolved;
  const auto ck_dir = r.find("ckpt");
  if (!ck_dir || ck_dir->empty()) usage("--ckpt is required");
  const std::string basis_name = r.get("reference");
  GreenBasis basis;
  if (basis_name == "hat") basis = GreenBasis::HatLinear;
  else if (basis_name == "constant") basis = GreenBasis::PiecewiseConstant;
  else usage("--reference must be hat or constant");
  const double k = as_k(r);
  const auto dir = as_out(r);
  const Checkpoint ck = read_checkpoint(*ck_dir);
  prepare_output_dir(dir, rc.force);
  write_run_manifest(dir, rc);
  const Grid grid = make_grid(ck.n_grid);
  const OperatorMatrix a = assemble_green_matrix(grid, basis, k);
  const ProbeResult pr = probe_greens(ck.params, grid, a.data);
  write_matrix(dir, "g_hat", pr.g_hat, "probe-response");
  write_matrix(dir, "g_raw", pr.g_raw, "probe-response-raw");
  write_matrix(dir, "reference", pr.reference, role_name(MatrixRole::GreenA));
  KeyValue rep;
  rep.set("model", model_kind_name(ck.params.kind));
  rep.set("n_grid", ck.n_grid);
  rep.set("relative_error", pr.relative_error);
  if (pr.inverse) {
    rep.set("invertible", pr.inverse->invertible);
    rep.set("condition", pr.inverse->condition);
    rep.set("bandedness", pr.inverse->bandedness);
    if (pr.inverse->invertible)
      write_matrix(dir, "l_hat", pr.inverse->l_hat, role_name(MatrixRole::StencilL));
  }
  rep.write(dir / "report.txt");
  out << "probe: relative error " << format_double(pr.relative_error) << '\n';
  return 0;
}

int run_sweep(const RunConfig& rc, std::ostream& out) {
  const KeyValue& r = rc.resolved;
  if (as_model(r) != ModelKind::FdFit) usage("sweep supports --model fd only");
  const auto qs = parse_int_list(r.get("q"));
  const auto grids = parse_int_list(r.get("grids"));
  const auto ps = parse_int_list(r.get("p"));
  for (int q : qs)
    if (q != 2 && q != 4) usage("--q accepts 2 and 4");
  for (int g : grids)
    if (g < 2) usage("--grids entries must be at least 2");
  for (int p : ps)
    if (p < 1) usage("--p entries must be at least 1");
  SweepOptions o;
  o.n_samples = as_samples(r);
  o.data_seed = as_uint(r, "data_seed");
  o.k = as_k(r);
  o.jobs = rc.jobs;
  const auto dir = as_out(r);
  prepare_output_dir(dir, rc.force);
  write_run_manifest(dir, rc);
  const auto rows = fd_grid_sweep(qs, grids, ps, o);
  write_sweep_csv(rows, dir / "sweep.csv");
  KeyValue rep;
  for (int q : qs) {
    for (int p : ps) {
      std::vector<double> dx, err;
      for (const auto& row : rows)
        if (row.q == q && row.p == p && row.relative_error > 0.0) {
          dx.push_back(1.0 / row.n_grid);
          err.push_back(row.relative_error);
        }
      const std::string key = "order.q" + std::to_string(q) + ".p" + std::to_string(p);
      if (dx.size() >= 3 && dx.size() == grids.size()) rep.set(key, fit_convergence_order(dx, err));
      else rep.set(key, "n/a");
    }
  }
  rep.write(dir / "report.txt");
  out << "sweep: " << rows.size() << " fits written to " << dir.string() << '\n';
  return 0;
}

int run_theory(const RunConfig& rc, std::ostream& out) {
  const KeyValue& r = rc.resolved;
  const auto ps = parse_int_list(r.get("p"));
  const int n_grid = as_n_grid(r);
  for (int p : ps)
    if (p < 1 || p > n_grid - 2) usage("--p entries must lie in [1, n_grid - 2]");
  const auto q = as_int(r, "q");
  if (q != 2 && q != 4) usage("--q accepts 2 and 4");
  TheoryOptions o;
  o.n_samples = as_samples(r);
  o.data_seed = as_uint(r, "data_seed");
  o.gd_steps = as_int(r, "gd_steps");
  if (o.gd_steps < 1) usage("--gd-steps must be positive");
  o.k = as_k(r);
  o.jobs = rc.jobs;
  const auto dir = as_out(r);
  prepare_output_dir(dir, rc.force);
  write_run_manifest(dir, rc);
  const TheoryReport rep = theory_comparison(ps, n_grid, static_cast<int>(q), o);
  write_theory_csv(rep, dir / "theory.csv");
  out << "theory: " << rep.rows.size() << " rows written to " << dir.string() << '\n';
  return 0;
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    const auto dots = tok.find("..");
    if (dots == std::string::npos) {
      const auto v = parse_int(tok);
      if (!v) usage("'" + tok + "' is not an integer");
      out.push_back(static_cast<int>(*v));
    } else {
      const auto a = parse_int(tok.substr(0, dots));
      const auto b = parse_int(tok.substr(dots + 2));
      if (!a || !b || *b < *a || *b - *a > 100000) usage("'" + tok + "' is not a valid range");
      for (auto v = *a; v <= *b; ++v) out.push_back(static_cast<int>(v));
    }
  }
  if (out.empty()) usage("empty list '" + text + "'");
  return out;
}

TrainConfig training_config_from(ModelKind kind, const KeyValue& r) {
  TrainConfig c = base_training_config(kind, r.find("mode").value_or("paper"));
  if (r.contains("seed")) c.seed = as_uint(r, "seed");
  if (auto v = r.find("optimizer")) {
    auto o = parse_optimizer(*v);
    if (!o) usage("unknown optimizer '" + *v + "'");
    c.optimizer = *o;
    if (c.optimizer == OptimizerKind::AdamW) c.auto_lr = false;
  }
  if (auto v = r.find("lr_schedule")) {
    auto s = parse_schedule(*v);
    if (!s) usage("unknown lr schedule '" + *v + "'");
    c.lr.kind = *s;
  }
  if (r.contains("lr_start")) c.lr.start = as_double(r, "lr_start");
  if (r.contains("lr_end")) c.lr.end = as_double(r, "lr_end");
  if (r.contains("lr_step_every")) c.lr.step_every = as_int(r, "lr_step_every");
  if (r.contains("lr_factor")) c.lr.factor = as_double(r, "lr_factor");
  if (r.contains("weight_decay")) c.weight_decay = as_double(r, "weight_decay");
  if (r.contains("batch_size")) c.batch_size = static_cast<int>(as_int(r, "batch_size"));
  if (r.contains("epochs")) {
    c.unit = BudgetUnit::Epochs;
    c.budget = as_int(r, "epochs");
  } else if (r.contains("steps")) {
    c.unit = BudgetUnit::Steps;
    c.budget = as_int(r, "steps");
  }
  if (auto v = r.find("init")) {
    auto s = parse_init_scheme(*v);
    if (!s) usage("unknown init scheme '" + *v + "'");
    c.init = *s;
  }
  if (r.contains("hidden")) c.shape.hidden = static_cast<int>(as_int(r, "hidden"));
  if (r.contains("q")) c.shape.stencil_q = static_cast<int>(as_int(r, "q"));
  if (r.contains("output_bias")) c.shape.output_bias = as_bool(r, "output_bias");
  if (r.contains("eval_every")) c.eval_every = static_cast<int>(as_int(r, "eval_every"));
  if (r.contains("select_best")) c.select_best = as_bool(r, "select_best");
  if (c.shape.stencil_q != 2 && c.shape.stencil_q != 4) usage("--q accepts 2 and 4");
  if (c.shape.hidden < 0) usage("--hidden must be non-negative");
  try {
    c.validate();
  } catch (const Error& e) {
    usage(e.what());
  }
  return c;
}

RunConfig parse_args(const std::vector<std::string>& args) {
  CLI::App app{"genbench: Poisson operator-learning benchmark"};
  app.require_subcommand(0, 1);
  RunConfig rc;
  std::string config_file;
  unsigned jobs = default_jobs();
  app.add_flag("--version", rc.show_version, "print version, format revision and RNG");

  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::map<std::string, CLI::Option*>> opts;
  std::map<std::string, CLI::App*> subs;
  for (const auto& spec : commands()) {
    CLI::App* sub = app.add_subcommand(spec.name, spec.help);
    subs[spec.name] = sub;
    sub->add_option("--config", config_file, "flat key = value configuration file");
    sub->add_flag("--force", rc.force, "overwrite an existing output directory");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1u, 1024u));
    std::vector<KeySpec> keys = spec.keys;
    if (spec.trains) keys.insert(keys.end(), kTrainingKeys.begin(), kTrainingKeys.end());
    for (const auto& k : keys) {
      std::string names = flag_name(k.key);
      if (k.key == "n") names = "--n,--samples";
      opts[spec.name][k.key] = sub->add_option(names, values[spec.name][k.key], k.help);
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    rc.help = app.help();
    return rc;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      rc.help = app.help();
      return rc;
    }
    usage(e.what());
  }
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) {
      rc.command = name;
      if (sub->get_help_ptr() && sub->get_help_ptr()->count() > 0) rc.help = sub->help();
    }
  }
  if (rc.show_version) return rc;
  if (rc.command.empty()) usage("a subcommand is required (gen, train, crosseval, probe, sweep, theory)");
  rc.jobs = jobs;

  const CommandSpec& spec = command_spec(rc.command);
  for (const auto& [key, opt] : opts[rc.command])
    if (opt->count() > 0) rc.from_flags.set(key, values[rc.command][key]);

  if (!config_file.empty()) {
    rc.config_path = config_file;
    rc.from_file = KeyValue::read(config_file);
    for (const auto& [k, v] : rc.from_file.entries()) {
      if (!opts[rc.command].count(k))
        usage("config file " + config_file + ": unknown key '" + k + "' for " + rc.command);
    }
  }
  rc.resolved = resolve(spec, rc.from_file, rc.from_flags);
  return rc;
}

int run(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  (void)err;
  if (!rc.help.empty()) {
    out << rc.help;
    return 0;
  }
  if (rc.show_version) {
    out << "genbench " << kVersion << "\nrevision " << kRevision << "\nrng " << kRngName << '\n';
    return 0;
  }
  if (rc.command == "gen") return run_gen(rc, out);
  if (rc.command == "train") return run_train(rc, out);
  if (rc.command == "crosseval") return run_crosseval(rc, out);
  if (rc.command == "probe") return run_probe(rc, out);
  if (rc.command == "sweep") return run_sweep(rc, out);
  if (rc.command == "theory") return run_theory(rc, out);
  usage("unknown subcommand '" + rc.command + "'");
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return run(parse_args(args), out, err);
  } catch (const Error& e) {
    err << "genbench: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "genbench: io: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "genbench: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace genbench
