#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "epolis/analytics/analytics.hpp"
#include "epolis/error.hpp"

namespace epolis::analytics {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using Row = std::vector<std::string>;

struct Table {
  std::string name;
  Row columns;
  std::vector<Row> rows;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string field(const std::string& s) {
  if (s.find_first_of("\t\r\n") != std::string::npos)
    throw Error(ErrorCode::Validation, "value contains a tab or newline: " + s);
  return s;
}

void write(const Table& t, const fs::path& dir) {
  std::ostringstream ss;
  auto line = [&](const Row& r) {
    for (std::size_t i = 0; i < r.size(); ++i) ss << (i ? "\t" : "") << field(r[i]);
    ss << '\n';
  };
  line(t.columns);
  for (const auto& r : t.rows) line(r);
  fs::path path = dir / (t.name + ".tsv");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!(out << ss.str())) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

void write_all(const std::vector<Table>& tables, const fs::path& dir, json extra = json::object()) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  json manifest = std::move(extra);
  manifest["format"] = 1;
  for (const auto& t : tables) {
    write(t, dir);
    manifest["tables"][t.name] = {{"file", t.name + ".tsv"}, {"columns", t.columns}, {"rows", t.rows.size()}};
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!(out << manifest.dump(2) << '\n')) throw Error(ErrorCode::Io, "cannot write manifest in " + dir.string());
}

Table read(const fs::path& dir, const std::string& name, const Row& columns) {
  fs::path path = dir / (name + ".tsv");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  Table t{name, columns, {}};
  std::string line;
  int n = 0;
  auto split = [](const std::string& s) {
    Row r;
    std::size_t start = 0;
    for (std::size_t tab; (tab = s.find('\t', start)) != std::string::npos; start = tab + 1) r.push_back(s.substr(start, tab - start));
    r.push_back(s.substr(start));
    return r;
  };
  while (std::getline(in, line)) {
    ++n;
    Row r = split(line);
    std::string where = path.string() + ":" + std::to_string(n) + ": ";
    if (n == 1) {
      if (r != columns) throw Error(ErrorCode::Corrupt, where + "unexpected header");
      continue;
    }
    if (r.size() != columns.size())
      throw Error(ErrorCode::Corrupt, where + "expected " + std::to_string(columns.size()) + " fields");
    t.rows.push_back(std::move(r));
  }
  if (n == 0) throw Error(ErrorCode::Corrupt, path.string() + ": missing header");
  return t;
}

std::int64_t integer(const std::string& s) {
  try {
    std::size_t used = 0;
    auto v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::Corrupt, "not an integer: '" + s + "'");
}

const Row kDoctrines{"pid", "name"};
const Row kAnswers{"session", "uid", "did", "cid", "pid", "time"};
const Row kVisits{"session", "uid", "sid", "start", "end", "reached_inner"};
const Row kVotes{"session", "uid", "verdict", "time"};

std::vector<Table> dataset_tables(const Dataset& d) {
  using std::to_string;
  Table doctrines{"doctrines", kDoctrines, {}}, answers{"answers", kAnswers, {}}, visits{"visits", kVisits, {}},
      votes{"votes", kVotes, {}};
  for (const auto& x : d.doctrines) doctrines.rows.push_back({to_string(x.pid), x.name});
  for (const auto& a : d.answers)
    answers.rows.push_back({a.session, to_string(a.uid), to_string(a.did), to_string(a.cid), to_string(a.pid), to_string(a.time)});
  for (const auto& v : d.visits)
    visits.rows.push_back({v.session, to_string(v.uid), to_string(v.sid), to_string(v.start), to_string(v.end),
                           v.reached_inner ? "1" : "0"});
  for (const auto& v : d.votes) votes.rows.push_back({v.session, to_string(v.uid), to_string(v.verdict), to_string(v.time)});

  Row vcols{"uid"};
  for (const auto& x : d.doctrines) vcols.push_back("p" + to_string(x.pid));
  Table vectors{"vectors", vcols, {}};
  for (const auto& [uid, v] : choice_vectors(d)) {
    Row r{to_string(uid)};
    for (double f : v) r.push_back(num(f));
    vectors.rows.push_back(std::move(r));
  }
  return {doctrines, answers, visits, votes, vectors};
}

std::vector<Table> clustering_tables(const ClusteringResult& c) {
  using std::to_string;
  Table clusters{"clusters", {"uid", "cluster"}, {}}, elbow{"elbow", {"k", "inertia", "silhouette"}, {}};
  for (const auto& [uid, k] : c.assignments) clusters.rows.push_back({to_string(uid), to_string(k)});
  for (const auto& r : c.table) elbow.rows.push_back({to_string(r.k), num(r.inertia), r.silhouette ? num(*r.silhouette) : ""});
  Row ccols{"cluster"};
  std::size_t dim = c.centroids.empty() ? 0 : c.centroids[0].size();
  for (std::size_t i = 0; i < dim; ++i) ccols.push_back("c" + to_string(i));
  Table centroids{"centroids", ccols, {}};
  for (std::size_t j = 0; j < c.centroids.size(); ++j) {
    Row r{to_string(j)};
    for (double x : c.centroids[j]) r.push_back(num(x));
    centroids.rows.push_back(std::move(r));
  }
  return {clusters, elbow, centroids};
}

json clustering_summary(const ClusteringResult& c) {
  json s{{"k", c.k}, {"degenerate", c.degenerate}};
  s["silhouette"] = c.silhouette ? json(*c.silhouette) : json(nullptr);
  return s;
}

}  // namespace

void export_dataset(const Dataset& data, const std::string& dir) { write_all(dataset_tables(data), dir); }

void export_clustering(const ClusteringResult& result, const std::string& dir) {
  write_all(clustering_tables(result), dir, {{"clustering", clustering_summary(result)}});
}

Dataset import_dataset(const std::string& dir) {
  Dataset d;
  for (const auto& r : read(dir, "doctrines", kDoctrines).rows) d.doctrines.push_back({integer(r[0]), r[1]});
  for (const auto& r : read(dir, "answers", kAnswers).rows)
    d.answers.push_back({r[0], integer(r[1]), integer(r[2]), integer(r[3]), integer(r[4]), integer(r[5])});
  for (const auto& r : read(dir, "visits", kVisits).rows)
    d.visits.push_back({r[0], integer(r[1]), integer(r[2]), integer(r[3]), integer(r[4]), integer(r[5]) != 0});
  for (const auto& r : read(dir, "votes", kVotes).rows)
    d.votes.push_back({r[0], integer(r[1]), integer(r[2]), integer(r[3])});
  return d;
}

void analyze(const Dataset& data, const std::string& dir, const AnalyzeOptions& options) {
  using std::to_string;
  auto tables = dataset_tables(data);
  auto name_of = [&](std::int64_t pid) {
    for (const auto& x : data.doctrines)
      if (x.pid == pid) return x.name;
    return std::string();
  };

  Table prevailing{"prevailing", {"did", "pid", "doctrine", "count", "answers", "tie"}, {}};
  auto add = [&](const std::string& did, const Prevailing& p) {
    std::int64_t total = 0;
    for (const auto& [pid, n] : p.counts) total += n;
    prevailing.rows.push_back({did, to_string(p.pid), name_of(p.pid), to_string(p.counts.at(p.pid)), to_string(total),
                               p.tie ? "1" : "0"});
  };
  std::set<std::int64_t> dids;
  for (const auto& a : data.answers) dids.insert(a.did);
  for (auto did : dids) add(to_string(did), prevailing_doctrine(data, did));
  if (!dids.empty()) add("all", prevailing_doctrine(data));
  tables.push_back(std::move(prevailing));

  Table popularity{"popularity", {"sid", "uid", "visits", "dwell_ms"}, {}};
  std::set<std::int64_t> sids;
  for (const auto& v : data.visits) sids.insert(v.sid);
  for (auto sid : sids) {
    auto p = sst_popularity(data, sid, options.visit_dwell);
    popularity.rows.push_back({to_string(sid), "all", to_string(p.visits), to_string(p.dwell)});
    for (const auto& [uid, vd] : p.per_user)
      popularity.rows.push_back({to_string(sid), to_string(uid), to_string(vd.first), to_string(vd.second)});
  }
  tables.push_back(std::move(popularity));

  json extra = json::object();
  auto vectors = choice_vectors(data);
  int n = static_cast<int>(vectors.size());
  int kmax = std::min(options.kmax, n - 1);
  ClusteringResult clustering;
  if (n >= 2 && options.kmin <= kmax) {
    clustering = opinion_groups(vectors, options.kmin, kmax, options.kmeans);
    extra["clustering"] = clustering_summary(clustering);
  } else {
    extra["clustering"] = {{"skipped", "needs at least " + to_string(options.kmin + 1) + " players, have " + to_string(n)}};
  }
  for (auto& t : clustering_tables(clustering)) tables.push_back(std::move(t));
  write_all(tables, dir, std::move(extra));
}

}  // namespace epolis::analytics
