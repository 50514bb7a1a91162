#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "epolis/error.hpp"
#include "epolis/sim/sim.hpp"

namespace epolis::sim {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!(out << text)) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

}  // namespace

SimOutputs run(const SimParams& params, const city::CityLayout& layout) {
  Simulation sim(params, layout);
  SimOutputs out;
  bool track_trust = params.positive_leaders + params.negative_leaders > 0;
  auto record_trust = [&] {
    std::vector<double> t;
    for (const auto& a : sim.agents()) t.push_back(a.trust);
    out.trust.push_back(std::move(t));
  };
  out.distribution.push_back(sim.distribution());
  if (track_trust) record_trust();
  auto previous = sim.doctrine_map();
  int last_change = 0, stable = 0;
  for (int step = 1; step <= params.max_steps; ++step) {
    sim.step();
    out.distribution.push_back(sim.distribution());
    if (track_trust) record_trust();
    auto now = sim.doctrine_map();
    if (now != previous) {
      last_change = step;
      stable = 0;
      previous = std::move(now);
    } else if (++stable >= params.window) {
      out.converged_at = last_change;
      break;
    }
  }
  out.steps = sim.steps();
  out.final_map = sim.doctrine_map();
  for (const auto& [sid, pid] : out.final_map) out.kinds[sid] = sim.kind_of(sid);
  out.dice = sim.dice();
  out.happiness_histogram.assign(10, 0);
  for (const auto& a : sim.agents()) {
    double h = sim.happiness(a);
    out.happiness.push_back(h);
    out.happiness_histogram[std::min(9, static_cast<int>(h * 10))]++;
  }
  return out;
}

void write_outputs(const SimOutputs& out, const SimParams& params, const city::CityLayout& layout,
                   const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto& docs = layout.doctrines();

  std::string dist = "step\tnone";
  for (const auto& d : docs) dist += "\t" + d.name;
  dist += "\n";
  for (std::size_t s = 0; s < out.distribution.size(); ++s) {
    dist += std::to_string(s);
    for (int n : out.distribution[s]) dist += "\t" + std::to_string(n);
    dist += "\n";
  }
  write_file(fs::path(dir) / "distribution.tsv", dist);

  std::string map = "sid\tkind\tpid\tdoctrine\n";
  for (const auto& [sid, pid] : out.final_map) {
    std::string name = "-";
    for (const auto& d : docs)
      if (pid && d.pid == *pid) name = d.name;
    map += std::to_string(sid) + "\t" + out.kinds.at(sid) + "\t" + (pid ? std::to_string(*pid) : "-") + "\t" +
           name + "\n";
  }
  write_file(fs::path(dir) / "final_map.tsv", map);

  std::string happy = "bin_lo\tbin_hi\tagents\n";
  for (int b = 0; b < 10; ++b)
    happy += num(b / 10.0) + "\t" + num((b + 1) / 10.0) + "\t" + std::to_string(out.happiness_histogram[b]) + "\n";
  write_file(fs::path(dir) / "happiness.tsv", happy);

  write_file(fs::path(dir) / "dice.tsv", "draws\taccepted\tacceptance\tmean\tvariance\n" +
                                             std::to_string(out.dice.draws) + "\t" +
                                             std::to_string(out.dice.accepted) + "\t" + num(out.dice.acceptance()) +
                                             "\t" + num(out.dice.mean()) + "\t" + num(out.dice.variance()) + "\n");

  if (!out.trust.empty()) {
    std::string trust = "step\taid\ttrust\n";
    for (std::size_t s = 0; s < out.trust.size(); ++s)
      for (std::size_t a = 0; a < out.trust[s].size(); ++a)
        trust += std::to_string(s) + "\t" + std::to_string(a + 1) + "\t" + num(out.trust[s][a]) + "\n";
    write_file(fs::path(dir) / "trust.tsv", trust);
  }

  nlohmann::json manifest = {{"params", nlohmann::json::parse(params.to_json())},
                             {"seed", params.seed},
                             {"layout_seed", layout.params().seed},
                             {"version", EPOLIS_VERSION},
                             {"steps", out.steps},
                             {"converged_at", out.converged_at ? nlohmann::json(*out.converged_at) : nlohmann::json()},
                             {"challenges", params.challenges}};
  write_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<SimOutputs> sweep(const std::vector<SimParams>& runs, const city::CityLayout& layout,
                              unsigned threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, std::max<std::size_t>(runs.size(), 1));
  std::vector<SimOutputs> out(runs.size());
  std::vector<std::exception_ptr> errors(runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < runs.size();) {
      try {
        out[i] = run(runs[i], layout);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace epolis::sim
