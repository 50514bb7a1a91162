// Operator command line: layouts, rules, the engine, simulation, analytics,
// the HTTP service and log replay.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "epolis/analytics/analytics.hpp"
#include "epolis/error.hpp"
#include "epolis/kb/programs.hpp"
#include "epolis/lang/parser.hpp"
#include "epolis/rete/engine.hpp"
#include "epolis/service/api.hpp"
#include "epolis/session/host.hpp"
#include "epolis/sim/sim.hpp"
#include "epolis/store/event_log.hpp"
#include "epolis/store/prefs.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace epolis;

namespace {

struct Globals {
  std::string data_dir = ".";
  std::string format = "table";
};
Globals g;

std::string path_in(const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path.string() : (fs::path(g.data_dir) / path).string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!(out << text)) throw Error(ErrorCode::Io, "cannot write " + path);
}

using Row = std::vector<std::string>;

void print_table(const Row& header, const std::vector<Row>& rows) {
  if (g.format == "tsv") {
    auto line = [](const Row& r) {
      for (std::size_t i = 0; i < r.size(); ++i) std::cout << (i ? "\t" : "") << r[i];
      std::cout << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return;
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
  auto line = [&](const Row& r) {
    std::string s;
    for (std::size_t i = 0; i < r.size(); ++i) {
      s += r[i];
      if (i + 1 < r.size()) s += std::string(width[i] - r[i].size() + 2, ' ');
    }
    std::cout << s << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream ss;
  ss << std::setprecision(precision) << v;
  return ss.str();
}

// An explicit file, else layout.json in the data directory, else the default city.
city::CityLayout load_layout(const std::string& explicit_path) {
  if (!explicit_path.empty()) return city::CityLayout::from_json(read_file(path_in(explicit_path)));
  std::string fallback = path_in("layout.json");
  if (fs::exists(fallback)) return city::CityLayout::from_json(read_file(fallback));
  return city::CityLayout::generate(city::LayoutParams{});
}

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::Io:
    case ErrorCode::Corrupt: return 2;
    default: return 1;
  }
}

}  // namespace

namespace cmd {

void layout_gen(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out) {
  city::LayoutParams params = config.empty() ? city::LayoutParams{} : city::LayoutParams::from_json(read_file(path_in(config)));
  if (seed) params.seed = *seed;
  auto layout = city::CityLayout::generate(params);
  if (out.empty()) {
    std::cout << layout.to_json() << '\n';
    return;
  }
  write_file(path_in(out), layout.to_json() + "\n");
  std::size_t permanent = 0;
  for (const auto& b : layout.blocks()) permanent += b.permanent_pid.has_value();
  print_table({"key", "value"}, {{"file", path_in(out)},
                                 {"blocks", std::to_string(layout.blocks().size())},
                                 {"dilemmas", std::to_string(layout.dilemmas().size())},
                                 {"permanent", std::to_string(permanent)},
                                 {"roads", std::to_string(layout.roads().size())},
                                 {"width", fmt(layout.width(), 10)},
                                 {"depth", fmt(layout.depth(), 10)},
                                 {"seed", std::to_string(params.seed)}});
}

// Parses rule files in order, each extending the schema of the ones before.
lang::Program load_programs(const std::vector<std::string>& files) {
  lang::Program all;
  all.schema = lang::Schema::builtin();
  auto add = [&](const std::string& text, const std::string& origin) {
    try {
      auto p = lang::parse_program(text, all.schema);
      all.schema = p.schema;
      all.templates.insert(all.templates.end(), p.templates.begin(), p.templates.end());
      all.rules.insert(all.rules.end(), p.rules.begin(), p.rules.end());
      all.facts.insert(all.facts.end(), p.facts.begin(), p.facts.end());
    } catch (const Error& e) {
      throw Error(e.code(), origin + ":" + e.what());
    }
  };
  if (files.empty())
    for (const auto& p : kb::builtin_programs()) add(p.source, "<builtin " + p.name + ">");
  for (const auto& f : files) add(read_file(path_in(f)), path_in(f));
  return all;
}

void rules_check(const std::vector<std::string>& files) {
  std::vector<Row> rows;
  auto check = [&](const std::string& name, const std::vector<std::string>& list) {
    auto p = load_programs(list);
    rete::Engine engine(p.schema);
    engine.add_rules(p.rules);  // duplicate names and network compilation
    rows.push_back({name, std::to_string(p.templates.size()), std::to_string(p.rules.size()),
                    std::to_string(p.facts.size()), "ok"});
  };
  if (files.empty()) check("<builtin>", {});
  for (const auto& f : files) check(f, {f});
  print_table({"file", "templates", "rules", "facts", "status"}, rows);
}

struct Tracer : rete::Listener {
  std::size_t n = 0;
  void on_fire(const std::string& rule, const rete::Token&) override { std::cout << "FIRE " << ++n << " " << rule << '\n'; }
  void on_emit(const std::string& text) override { std::cout << text; }
};

int rete_run(const std::vector<std::string>& rule_files, const std::vector<std::string>& fact_files, bool trace,
             std::optional<std::size_t> limit) {
  auto p = load_programs(rule_files);
  rete::Engine engine(p.schema);
  engine.add_rules(p.rules);
  Tracer tracer;
  if (trace) engine.add_listener(&tracer);
  for (const auto& f : p.facts) engine.assert_fact(f);
  for (const auto& file : fact_files)
    for (const auto& f : lang::parse_facts(read_file(path_in(file)), p.schema)) engine.assert_fact(f);
  auto result = engine.run(limit);
  if (!trace) std::cout << engine.output();
  for (const auto& e : result.errors) std::cerr << "rule " << e.rule << ": " << e.message << '\n';
  std::cerr << "firings: " << result.firings << (result.limit_hit ? " (limit reached)" : "") << '\n';
  return result.errors.empty() ? 0 : 1;
}

void dump_network(const std::vector<std::string>& rule_files) {
  auto p = load_programs(rule_files);
  rete::Engine engine(p.schema);
  engine.add_rules(p.rules);
  std::cout << engine.network().dump();
  auto s = engine.network().stats();
  print_table({"node", "count"}, {{"alpha", std::to_string(s.alpha_nodes)},
                                  {"alpha-memory", std::to_string(s.alpha_memories)},
                                  {"entry", std::to_string(s.entry_nodes)},
                                  {"join", std::to_string(s.join_nodes)},
                                  {"negation", std::to_string(s.negation_nodes)},
                                  {"filter", std::to_string(s.filter_nodes)},
                                  {"production", std::to_string(s.production_nodes)},
                                  {"total", std::to_string(s.total())}});
}

sim::SimParams sim_params(const std::string& config, std::optional<std::uint64_t> seed) {
  auto p = config.empty() ? sim::SimParams{} : sim::SimParams::from_json(read_file(path_in(config)));
  if (seed) p.seed = *seed;
  p.validate();
  return p;
}

Row sim_row(const sim::SimOutputs& o) {
  std::string dist;
  for (std::size_t i = 0; i < o.distribution.back().size(); ++i)
    dist += (i ? "," : "") + std::to_string(o.distribution.back()[i]);
  double happy = 0;
  for (double h : o.happiness) happy += h;
  return {std::to_string(o.steps), o.converged_at ? std::to_string(*o.converged_at) : "none", dist,
          fmt(o.dice.acceptance()), o.happiness.empty() ? "" : fmt(happy / o.happiness.size())};
}

void sim_run(const std::string& config, std::optional<std::uint64_t> seed, const std::string& layout_path,
             const std::string& out) {
  auto layout = load_layout(layout_path);
  auto params = sim_params(config, seed);
  auto result = sim::run(params, layout);
  if (!out.empty()) sim::write_outputs(result, params, layout, path_in(out));
  print_table({"steps", "converged_at", "distribution", "dice_acceptance", "mean_happiness"}, {sim_row(result)});
}

void sim_sweep(const std::string& config, const std::string& grid_path, const std::string& layout_path,
               const std::string& out, unsigned threads) {
  auto layout = load_layout(layout_path);
  json base = json::parse(sim_params(config, std::nullopt).to_json());
  json grid = json::parse(read_file(path_in(grid_path)));
  if (!grid.is_object() || grid.empty()) throw Error(ErrorCode::Validation, "grid must be a non-empty object of arrays");
  std::vector<std::string> keys;
  for (const auto& [k, v] : grid.items()) {
    if (!v.is_array() || v.empty()) throw Error(ErrorCode::Validation, "grid entry " + k + " must be a non-empty array");
    keys.push_back(k);
  }
  std::vector<json> combos{json::object()};
  for (const auto& k : keys) {
    std::vector<json> next;
    for (const auto& c : combos)
      for (const auto& v : grid[k]) {
        json n = c;
        n[k] = v;
        next.push_back(n);
      }
    combos = std::move(next);
  }
  std::vector<sim::SimParams> runs;
  for (const auto& c : combos) {
    json p = base;
    for (const auto& [k, v] : c.items()) p[k] = v;
    runs.push_back(sim::SimParams::from_json(p.dump()));
  }
  auto results = sim::sweep(runs, layout, threads);
  Row header = {"run"};
  header.insert(header.end(), keys.begin(), keys.end());
  for (const auto& h : {"steps", "converged_at", "distribution", "dice_acceptance", "mean_happiness"}) header.push_back(h);
  std::vector<Row> rows;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "run-%03zu", i + 1);
    if (!out.empty()) sim::write_outputs(results[i], runs[i], layout, (fs::path(path_in(out)) / name).string());
    Row r{name};
    for (const auto& k : keys) r.push_back(combos[i][k].dump());
    auto s = sim_row(results[i]);
    r.insert(r.end(), s.begin(), s.end());
    rows.push_back(std::move(r));
  }
  if (!out.empty()) {
    std::ostringstream tsv;
    for (std::size_t i = 0; i < header.size(); ++i) tsv << (i ? "\t" : "") << header[i];
    tsv << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) tsv << (i ? "\t" : "") << r[i];
      tsv << '\n';
    }
    write_file((fs::path(path_in(out)) / "sweep.tsv").string(), tsv.str());
  }
  print_table(header, rows);
}

void analyze(const std::string& log, const std::string& layout_path, const std::string& out,
             const analytics::AnalyzeOptions& options) {
  auto layout = load_layout(layout_path);
  auto data = analytics::Dataset::from_log(store::read_log(path_in(log)), layout);
  std::string dir = path_in(out);
  analytics::analyze(data, dir, options);
  std::ifstream in(fs::path(dir) / "prevailing.tsv");
  std::string line;
  std::getline(in, line);
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    Row r;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '\t');) r.push_back(f);
    rows.push_back(r);
  }
  print_table({"did", "pid", "doctrine", "count", "answers", "tie"}, rows);
  auto manifest = json::parse(read_file((fs::path(dir) / "manifest.json").string()));
  std::cerr << "players: " << data.users().size() << ", clustering: " << manifest["clustering"].dump() << '\n';
}

void replay(const std::string& log, const std::string& layout_path, const std::string& out) {
  auto layout = load_layout(layout_path);
  auto records = store::read_log(path_in(log));
  auto state = session::replay(records, layout);
  if (!out.empty()) write_file(path_in(out), session::to_json(state).dump(2) + "\n");
  std::vector<Row> rows;
  for (const auto& [id, s] : state.sessions)
    rows.push_back({id, std::to_string(s.uid), std::string(session::to_string(s.phase)),
                    std::to_string(s.answered.size()) + "/" + std::to_string(layout.dilemmas().size()),
                    s.verdict ? std::to_string(*s.verdict) : "-"});
  std::cout << "records " << records.size() << ", sessions " << state.sessions.size() << '\n';
  if (!rows.empty()) print_table({"session", "uid", "phase", "answered", "verdict"}, rows);
}

void serve(const std::string& config_path, std::optional<int> port, const std::string& host) {
  auto config = service::ServiceConfig::load(config_path.empty() ? std::nullopt : std::optional(path_in(config_path)));
  if (config.data_dir == "." && g.data_dir != ".") config.data_dir = g.data_dir;
  if (port) config.port = *port;
  if (!host.empty()) config.host = host;
  std::string layout_file = config.resolve(config.layout);
  city::CityLayout layout = fs::exists(layout_file) ? city::CityLayout::from_json(read_file(layout_file))
                                                    : city::CityLayout::generate(city::LayoutParams{});
  if (!fs::exists(layout_file)) write_file(layout_file, layout.to_json() + "\n");
  store::EventLog log(config.resolve(config.log));
  store::PrefsStore prefs(config.resolve(config.prefs));
  service::Api api(layout, &log, &prefs);

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  service::Server server(api, config.host, config.port);
  int bound = server.start();
  std::cout << "listening on http://" << config.host << ":" << bound << " (data " << config.data_dir << ")" << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  std::cout << "stopped" << std::endl;
}

}  // namespace cmd

int main(int argc, char** argv) {
  CLI::App app{"e-polis: knowledge-based city game back end"};
  app.set_version_flag("--version", EPOLIS_VERSION);
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  app.add_option("--data-dir", g.data_dir, "Directory that relative paths resolve against")->capture_default_str();
  app.add_option("--format", g.format, "Output format for tables")
      ->check(CLI::IsMember({"table", "tsv"}))
      ->capture_default_str();
  std::function<int()> action;

  auto* layout = app.add_subcommand("layout", "City layouts")->require_subcommand(1);
  auto* gen = layout->add_subcommand("gen", "Generate a layout; prints JSON unless --out is given");
  static std::string gen_config, gen_out;
  static std::optional<std::uint64_t> gen_seed;
  gen->add_option("--config", gen_config, "Layout parameters (JSON)");
  gen->add_option("--seed", gen_seed, "Overrides the seed in --config");
  gen->add_option("--out", gen_out, "Layout file to write");
  gen->callback([&] { action = [] { return cmd::layout_gen(gen_config, gen_seed, gen_out), 0; }; });

  auto* rules = app.add_subcommand("rules", "Rule programs")->require_subcommand(1);
  auto* check = rules->add_subcommand("check", "Parse and compile rule files (the builtin program when none given)");
  static std::vector<std::string> check_files;
  check->add_option("files", check_files, "Rule files (.prl)");
  check->callback([&] { action = [] { return cmd::rules_check(check_files), 0; }; });

  auto* rete = app.add_subcommand("rete", "Rule engine")->require_subcommand(1);
  auto* rrun = rete->add_subcommand("run", "Run rules over facts and print their output");
  static std::vector<std::string> run_rules, run_facts;
  static bool run_trace = false;
  static std::optional<std::size_t> run_limit;
  rrun->add_option("--rules", run_rules, "Rule files; the builtin program when omitted");
  rrun->add_option("--facts", run_facts, "Fact files");
  rrun->add_flag("--trace", run_trace, "Print each firing as it happens");
  rrun->add_option("--limit", run_limit, "Stop after this many firings");
  rrun->callback([&] { action = [] { return cmd::rete_run(run_rules, run_facts, run_trace, run_limit); }; });

  auto* dump = app.add_subcommand("dump-network", "Print the compiled rete network");
  static std::vector<std::string> dump_rules;
  dump->add_option("--rules", dump_rules, "Rule files; the builtin program when omitted");
  dump->callback([&] { action = [] { return cmd::dump_network(dump_rules), 0; }; });

  auto* sim = app.add_subcommand("sim", "Agent simulation")->require_subcommand(1);
  static std::string sim_config, sim_layout, sim_out, sweep_grid;
  static std::optional<std::uint64_t> sim_seed;
  static unsigned sweep_threads = 0;
  auto* srun = sim->add_subcommand("run", "One simulation run");
  srun->add_option("--config", sim_config, "Simulation parameters (JSON)");
  srun->add_option("--seed", sim_seed, "Overrides the seed in --config");
  srun->add_option("--layout", sim_layout, "Layout file (default: layout.json in the data dir, else generated)");
  srun->add_option("--out", sim_out, "Directory for the output tables");
  srun->callback([&] { action = [] { return cmd::sim_run(sim_config, sim_seed, sim_layout, sim_out), 0; }; });
  auto* ssweep = sim->add_subcommand("sweep", "Cartesian parameter grid, runs in parallel");
  ssweep->add_option("--config", sim_config, "Base simulation parameters (JSON)");
  ssweep->add_option("--grid", sweep_grid, "JSON object mapping parameter names to value arrays")->required();
  ssweep->add_option("--layout", sim_layout, "Layout file");
  ssweep->add_option("--out", sim_out, "Directory for per-run outputs and sweep.tsv");
  ssweep->add_option("--threads", sweep_threads, "Worker threads (0: one per core)");
  ssweep->callback([&] { action = [] { return cmd::sim_sweep(sim_config, sweep_grid, sim_layout, sim_out, sweep_threads), 0; }; });

  auto* an = app.add_subcommand("analyze", "Research tables from an event log");
  static std::string an_log, an_layout, an_out;
  static analytics::AnalyzeOptions an_opts;
  an->add_option("--log", an_log, "Event log")->required();
  an->add_option("--layout", an_layout, "Layout the log was recorded on");
  an->add_option("--out", an_out, "Output directory")->required();
  an->add_option("--kmin", an_opts.kmin, "Smallest k")->capture_default_str();
  an->add_option("--kmax", an_opts.kmax, "Largest k")->capture_default_str();
  an->add_option("--seed", an_opts.kmeans.seed, "k-means seed")->capture_default_str();
  an->add_option("--visit-dwell", an_opts.visit_dwell, "Stay length (ms) that counts as a visit")->capture_default_str();
  an->callback([&] { action = [] { return cmd::analyze(an_log, an_layout, an_out, an_opts), 0; }; });

  auto* srv = app.add_subcommand("serve", "Run the HTTP service until interrupted");
  static std::string srv_config, srv_host;
  static std::optional<int> srv_port;
  srv->add_option("--config", srv_config, "Service configuration (JSON)");
  srv->add_option("--port", srv_port, "Overrides the configured port");
  srv->add_option("--host", srv_host, "Overrides the configured host");
  srv->callback([&] { action = [] { return cmd::serve(srv_config, srv_port, srv_host), 0; }; });

  auto* rep = app.add_subcommand("replay", "Rebuild state from an event log and summarise it");
  static std::string rep_log, rep_layout, rep_out;
  rep->add_option("--log", rep_log, "Event log")->required();
  rep->add_option("--layout", rep_layout, "Layout the log was recorded on");
  rep->add_option("--out", rep_out, "Write the final state as JSON");
  rep->callback([&] { action = [] { return cmd::replay(rep_log, rep_layout, rep_out), 0; }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
