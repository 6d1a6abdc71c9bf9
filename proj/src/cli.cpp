#include "cnv/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "cnv/report.hpp"
#include "cnv/sim.hpp"
#include "cnv/workloads.hpp"

namespace cnv::cli {

namespace {

std::size_t parse_size(std::string_view s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw ValidationError("bad number '" + std::string(s) + "'");
  }
  return v;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  write_file_atomic(path, std::span<const char>(text.data(), text.size()));
}

// Options shared by `gen` and the synthetic mode of `run`.
struct SynthOptions {
  std::string dims = "8x8x32";
  std::string filters = "4x3x3";
  std::size_t stride = 1;
  std::size_t brick = 16;
  double pa = 0.0;
  double pw = 0.0;
  int vmin = -128;
  int vmax = 127;
  std::uint64_t seed = 1;

  void add_to(CLI::App& app) {
    app.add_option("--dims", dims, "input activations XxYxI")->capture_default_str();
    app.add_option("--filters", filters, "filters FxFXxFY (count x width x height)")->capture_default_str();
    app.add_option("--stride", stride, "window stride")->capture_default_str();
    app.add_option("--brick", brick, "brick size B")->capture_default_str();
    app.add_option("--pa", pa, "activation zero probability")->capture_default_str();
    app.add_option("--pw", pw, "weight zero probability")->capture_default_str();
    app.add_option("--vmin", vmin, "smallest generated value")->capture_default_str();
    app.add_option("--vmax", vmax, "largest generated value")->capture_default_str();
    app.add_option("--seed", seed, "generator seed")->capture_default_str();
  }

  SyntheticSpec spec() const {
    SyntheticSpec s;
    s.input = parse_dims(dims);
    const Extent3 f = parse_dims(filters);
    s.filter_count = f.x;
    s.filter_x = f.y;
    s.filter_y = f.depth;
    s.stride = stride;
    s.brick = brick;
    s.act_sparsity = pa;
    s.weight_sparsity = pw;
    s.value_min = vmin;
    s.value_max = vmax;
    s.seed = seed;
    return s;
  }
};

struct RunOptions {
  SynthOptions synth;
  std::string layer;
  std::string name;
  std::vector<std::string> archs{"baseline", "cnv", "cnv2"};
  std::size_t tiles = 16;
  std::size_t fpt = 16;
  std::size_t lanes = 0;
  std::size_t fetch_latency = 0;
  std::string act_crit = "zero";
  std::string weight_crit = "zero";
  std::string sync = "lockstep";
  std::string empty_cost = "zero";
  std::string group = "resident";
  std::string baseline = "brick";
  std::string source = "raw";
  std::string encoding = "zfnaf";
  std::string json_path;
  std::string csv_path;
  std::string trace_path;
  std::string trace_arch = "cnv";
  bool serial = false;
};

std::string percent(std::uint64_t part, std::uint64_t whole) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << (whole ? 100.0 * part / whole : 0.0) << '%';
  return os.str();
}

int cmd_gen(const SynthOptions& o, const std::string& out_path, std::ostream& out) {
  const Layer layer = gen_synthetic(o.spec());
  save_layer(out_path, layer);
  const auto s = summarize(layer);
  out << "wrote " << out_path << ": activations " << to_string(Extent3{layer.acts.size_x(), layer.acts.size_y(), layer.acts.logical_depth()})
      << " zero " << percent(s.zero_activations, s.activations) << ", " << layer.filters.count()
      << " filters " << layer.filters.size_x() << 'x' << layer.filters.size_y() << " zero "
      << percent(s.zero_weights, s.weights) << '\n';
  return kOk;
}

void apply_thread_cap() {
  if (const char* env = std::getenv("SPARSE_ACCEL_SIM_THREADS")) {
    const std::size_t n = parse_size(env);
    if (n == 0) throw ValidationError("SPARSE_ACCEL_SIM_THREADS must be positive");
    omp_set_num_threads(static_cast<int>(n));
  }
}

int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err) {
  if (o.archs.empty()) throw ValidationError("select at least one architecture");
  std::vector<Arch> archs;
  for (const auto& a : o.archs) archs.push_back(parse_arch(a));

  Layer layer;
  std::string name = o.name;
  if (!o.layer.empty()) {
    if (!std::filesystem::exists(o.layer)) throw ConfigError("layer file not found: " + o.layer);
    layer = load_layer(o.layer);
    if (name.empty()) name = std::filesystem::path(o.layer).filename().string();
  } else {
    layer = gen_synthetic(o.synth.spec());
    if (name.empty()) name = "synthetic";
  }

  TileConfig tile;
  tile.tiles = o.tiles;
  tile.filters_per_tile = o.fpt;
  tile.brick = layer.brick;
  tile.lanes = o.lanes ? o.lanes : layer.brick;
  tile.sync = parse_sync_policy(o.sync);
  tile.empty_cost = parse_empty_brick_cost(o.empty_cost);
  tile.group = parse_group_scope(o.group);
  tile.baseline = parse_baseline_assignment(o.baseline);
  tile.fetch_latency = o.fetch_latency;
  tile.validate();

  const auto act_crit = IneffCriterion::parse(o.act_crit);
  const auto weight_crit = IneffCriterion::parse(o.weight_crit);
  const Arch trace_arch = parse_arch(o.trace_arch);
  const LayerConfig cfg = layer.config();
  cfg.validate(layer.acts, layer.filters);

  SimOptions opts;
  opts.activation_format = parse_format(o.source);
  opts.output_format = parse_format(o.encoding);
  opts.output_criterion = act_crit;
  opts.parallel = !o.serial;
  apply_thread_cap();

  std::vector<DispatchEvent> trace;
  auto simulate = [&](Arch arch) {
    SimOptions run_opts = opts;
    if (!o.trace_path.empty() && arch == trace_arch) run_opts.trace = &trace;
    switch (arch) {
      case Arch::Baseline:
        return run_baseline(layer.acts, layer.filters, cfg, tile, run_opts);
      case Arch::Cnv:
        return run_cnv(layer.acts, layer.filters, cfg, tile, act_crit, run_opts);
      case Arch::Cnv2:
        return run_cnv2(layer.acts, layer.filters, cfg, tile, act_crit, weight_crit, run_opts);
    }
    throw ValidationError("unknown architecture");
  };

  // The baseline always runs: every speedup is measured against it.
  const SimResult base = simulate(Arch::Baseline);
  std::vector<RunRecord> records;
  bool all_equivalent = true;
  for (Arch arch : archs) {
    const SimResult r = arch == Arch::Baseline ? base : simulate(arch);
    RunRecord rec;
    rec.layer = name;
    rec.report = r.report;
    rec.speedup = static_cast<double>(base.report.cycles) /
                  static_cast<double>(std::max<std::uint64_t>(r.report.cycles, 1));
    rec.equivalent =
        r.output == expected_output(arch, layer.acts, layer.filters, cfg, tile, act_crit, weight_crit);
    all_equivalent = all_equivalent && rec.equivalent;
    records.push_back(std::move(rec));
  }

  out << console_table(records);

  const nlohmann::json config = {
      {"layer", name},
      {"input", to_string(layer.acts.dims())},
      {"filters", std::to_string(layer.filters.count()) + "x" + std::to_string(layer.filters.size_x()) +
                      "x" + std::to_string(layer.filters.size_y())},
      {"stride", layer.stride},
      {"brick", tile.brick},
      {"lanes", tile.lanes},
      {"tiles", tile.tiles},
      {"filters_per_tile", tile.filters_per_tile},
      {"sync", to_string(tile.sync)},
      {"empty_cost", to_string(tile.empty_cost)},
      {"group", to_string(tile.group)},
      {"baseline", to_string(tile.baseline)},
      {"act_crit", act_crit.to_string()},
      {"weight_crit", weight_crit.to_string()},
      {"source", to_string(opts.activation_format)},
      {"encoding", to_string(opts.output_format)},
  };
  if (!o.json_path.empty()) write_text(o.json_path, run_report_json(records, config).dump(2) + "\n");
  if (!o.csv_path.empty()) write_text(o.csv_path, to_csv(records));
  if (!o.trace_path.empty()) {
    std::ostringstream os;
    write_trace(os, trace);
    write_text(o.trace_path, os.str());
  }
  if (!all_equivalent) {
    err << "error: output mismatch against the reference convolution\n";
    return kEquivalenceFailure;
  }
  return kOk;
}

int cmd_compare(const std::vector<std::string>& inputs, const std::string& out_path,
                std::ostream& out) {
  std::vector<std::pair<std::string, nlohmann::json>> reports;
  for (const auto& path : inputs) {
    try {
      reports.emplace_back(std::filesystem::path(path).filename().string(),
                           nlohmann::json::parse(slurp(path)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ": " + e.what());
    }
  }
  const Comparison c = compare_reports(reports);
  out << console_table(c.rows);
  for (const auto& [arch, g] : c.geomean_speedup) {
    out << "geomean speedup " << to_string(arch) << ": " << std::fixed << std::setprecision(6) << g
        << '\n';
  }
  if (!out_path.empty()) write_text(out_path, comparison_csv(c));
  return kOk;
}

// Long flag names present on the command line.
std::set<std::string> given_flags(const std::vector<std::string>& args) {
  std::set<std::string> names;
  for (const auto& a : args) {
    if (a.rfind("--", 0) == 0) names.insert(a.substr(2, a.find('=') - 2));
  }
  return names;
}

}  // namespace

Extent3 parse_dims(std::string_view text) {
  Extent3 e;
  std::size_t* fields[] = {&e.x, &e.y, &e.depth};
  std::size_t k = 0;
  std::size_t start = 0;
  for (;;) {
    const auto sep = text.find('x', start);
    const auto part = text.substr(start, sep == std::string_view::npos ? sep : sep - start);
    if (k == 3) throw ValidationError("expected AxBxC, got '" + std::string(text) + "'");
    *fields[k++] = parse_size(part);
    if (sep == std::string_view::npos) break;
    start = sep + 1;
  }
  if (k != 3) throw ValidationError("expected AxBxC, got '" + std::string(text) + "'");
  return e;
}

std::vector<std::pair<std::string, std::string>> parse_config(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (key.empty()) throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

int run(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args = args_in;
  CLI::App app{"Cycle-level simulator for zero-skipping CNN accelerators"};
  app.require_subcommand(1);

  SynthOptions gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic layer file");
  gen.add_to(*gen_cmd);
  gen_cmd->add_option("-o,--out", gen_out, "output path (.layer or .layer.json)")->required();

  RunOptions run_o;
  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "simulate architectures on one layer");
  run_o.synth.add_to(*run_cmd);
  run_cmd->add_option("--config", config_path, "key = value file; flags take precedence");
  run_cmd->add_option("--layer", run_o.layer, "layer file (.layer or .layer.json)");
  run_cmd->add_option("--name", run_o.name, "label for report rows");
  run_cmd->add_option("--arch", run_o.archs, "architectures (baseline,cnv,cnv2)")->delimiter(',');
  run_cmd->add_option("--tiles", run_o.tiles, "tiles T")->capture_default_str();
  run_cmd->add_option("--fpt", run_o.fpt, "filters per tile")->capture_default_str();
  run_cmd->add_option("--lanes", run_o.lanes, "neuron lanes (0: brick size)")->capture_default_str();
  run_cmd->add_option("--act-crit", run_o.act_crit, "activation criterion zero|abs:T|pow2:K");
  run_cmd->add_option("--weight-crit", run_o.weight_crit, "weight criterion zero|abs:T|pow2:K");
  run_cmd->add_option("--sync", run_o.sync, "lockstep|window");
  run_cmd->add_option("--empty-cost", run_o.empty_cost, "cycles for an empty brick: zero|one");
  run_cmd->add_option("--group", run_o.group, "IS product scope: resident|tile");
  run_cmd->add_option("--baseline", run_o.baseline, "baseline lane assignment: brick|activation");
  run_cmd->add_option("--fetch-latency", run_o.fetch_latency, "initial NM fetch latency");
  run_cmd->add_option("--source", run_o.source, "activation storage read by the dispatcher");
  run_cmd->add_option("--encoding", run_o.encoding, "output encoding for footprint_bits");
  run_cmd->add_option("--json", run_o.json_path, "write JSON report");
  run_cmd->add_option("--csv", run_o.csv_path, "write CSV report");
  run_cmd->add_option("--trace", run_o.trace_path, "write dispatch event trace");
  run_cmd->add_option("--trace-arch", run_o.trace_arch, "architecture whose events are traced");
  run_cmd->add_flag("--serial", run_o.serial, "single-threaded simulation");

  std::vector<std::string> inputs;
  std::string compare_out;
  auto* cmp_cmd = app.add_subcommand("compare", "merge JSON reports and summarize speedups");
  cmp_cmd->add_option("reports", inputs, "JSON report files")->required();
  cmp_cmd->add_option("-o,--out", compare_out, "merged CSV path");

  try {
    // Config-file entries fill in only flags absent from the command line.
    if (!args.empty() && args[0] == "run") {
      for (std::size_t k = 1; k < args.size(); ++k) {
        std::string path;
        if (args[k] == "--config" && k + 1 < args.size()) path = args[k + 1];
        if (args[k].rfind("--config=", 0) == 0) path = args[k].substr(9);
        if (path.empty()) continue;
        const auto given = given_flags(args);
        for (auto& [key, value] : parse_config(slurp(path))) {
          if (key == "config" || given.count(key)) continue;
          if (value == "true" && key == "serial") {
            args.push_back("--serial");
          } else {
            args.push_back("--" + key);
            args.push_back(value);
          }
        }
        break;
      }
    }

    std::vector<const char*> argv{"cnvsim"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return kOk;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << '\n';
      return kValidationError;
    }

    if (gen_cmd->parsed()) return cmd_gen(gen, gen_out, out);
    if (run_cmd->parsed()) return cmd_run(run_o, out, err);
    return cmd_compare(inputs, compare_out, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace cnv::cli
