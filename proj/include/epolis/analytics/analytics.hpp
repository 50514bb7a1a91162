#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epolis/city/layout.hpp"
#include "epolis/lang/ast.hpp"
#include "epolis/store/event_log.hpp"

namespace epolis::analytics {

struct Answer {
  std::string session;
  std::int64_t uid = 0, did = 0, cid = 0, pid = 0, time = 0;
  friend bool operator==(const Answer&, const Answer&) = default;
};

// A finished stay in a block's outer zone.
struct Visit {
  std::string session;
  std::int64_t uid = 0, sid = 0, start = 0, end = 0;
  bool reached_inner = false;
  friend bool operator==(const Visit&, const Visit&) = default;
};

struct Vote {
  std::string session;
  std::int64_t uid = 0, verdict = 0, time = 0;
  friend bool operator==(const Vote&, const Vote&) = default;
};

struct Dataset {
  std::vector<city::Doctrine> doctrines;  // vector order for ChoiceVector
  std::vector<Answer> answers;            // every answer, revisions included
  std::vector<Visit> visits;
  std::vector<Vote> votes;

  // Rebuilds answers, visits and votes from a session log. The layout maps
  // cids to doctrines. Stays still open when the log ends are dropped.
  static Dataset from_log(const std::vector<store::EventRecord>& records, const city::CityLayout& layout);
  // Historical facts (H_UserAnsweredDilemma with L_PoliticisedUserChoice,
  // H_UserInLocationHist with H_UserInNestedLocationHist, H_UserVoted).
  static Dataset from_facts(const std::vector<lang::FactLiteral>& facts,
                            const std::vector<city::Doctrine>& doctrines);

  // The last answer of each (uid, did), ordered by (uid, did).
  std::vector<Answer> latest_answers() const;
  std::vector<std::int64_t> users() const;  // everyone who answered, ascending

  friend bool operator==(const Dataset& a, const Dataset& b);
};

struct Prevailing {
  std::int64_t pid = 0;
  std::map<std::int64_t, std::int64_t> counts;  // pid -> latest answers
  bool tie = false;                             // resolved to the lowest pid
};

// Counting runs through a knowledge base loaded with the latest answers.
// Throws Validation when there are no answers (for `did`, or at all).
Prevailing prevailing_doctrine(const Dataset& data, std::int64_t did);
Prevailing prevailing_doctrine(const Dataset& data);

struct ChoiceVector {
  std::int64_t uid = 0;
  std::vector<double> freq;  // one entry per doctrine
};
ChoiceVector choice_vector(const Dataset& data, std::int64_t uid);

struct Position {
  std::int64_t pid = 0;
  bool tie = false;
};
// Throws Validation for a player without answers.
Position predominant_position(const Dataset& data, std::int64_t uid);
bool divergence(const Dataset& data, std::int64_t uid, std::int64_t did);

struct Popularity {
  std::int64_t visits = 0;
  std::int64_t dwell = 0;  // ms
  std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> per_user;  // uid -> (visits, dwell)
};
// A stay counts as a visit when it reaches the inner zone or lasts visit_dwell.
Popularity sst_popularity(const Dataset& data, std::int64_t sid, std::int64_t visit_dwell = 10'000);

using Vector = std::vector<double>;

struct KMeansResult {
  std::vector<int> assignments;
  std::vector<Vector> centroids;
  double inertia = 0;
  std::vector<double> inertia_trace;  // after each iteration of the kept run
};

struct KMeansOptions {
  std::uint64_t seed = 1;
  int max_iterations = 100;
  int restarts = 10;  // best inertia kept
};

// Lloyd's algorithm with k-means++ seeding. Throws Validation unless 1 <= k <= n.
KMeansResult kmeans(const std::vector<Vector>& points, int k, const KMeansOptions& options = {});
// Mean silhouette; singleton clusters score 0. Nothing when fewer than two
// clusters are populated.
std::optional<double> silhouette(const std::vector<Vector>& points, const std::vector<int>& assignments);

struct ClusteringRow {
  int k = 0;
  double inertia = 0;
  std::optional<double> silhouette;
};

struct ClusteringResult {
  int k = 0;
  std::map<std::int64_t, int> assignments;  // uid -> cluster
  std::vector<Vector> centroids;
  std::optional<double> silhouette;  // unset for degenerate data
  std::vector<ClusteringRow> table;  // one row per k tried
  bool degenerate = false;           // every vector identical; one cluster reported
};

// Runs k-means for every k in [kmin, kmax] and keeps the best silhouette.
// Throws Validation for fewer than two vectors or a range outside [2, n - 1].
ClusteringResult opinion_groups(const std::map<std::int64_t, Vector>& vectors, int kmin, int kmax,
                                const KMeansOptions& options = {});
std::map<std::int64_t, Vector> choice_vectors(const Dataset& data);

// Tab-separated tables with a header row, plus manifest.json listing them.
void export_dataset(const Dataset& data, const std::string& dir);
Dataset import_dataset(const std::string& dir);
void export_clustering(const ClusteringResult& result, const std::string& dir);

// Everything `epolis analyze` writes: the dataset tables plus prevailing,
// popularity and clustering tables. Clustering is skipped (header only) when
// there are too few players for the k range.
struct AnalyzeOptions {
  int kmin = 2, kmax = 9;
  KMeansOptions kmeans;
  std::int64_t visit_dwell = 10'000;
};
void analyze(const Dataset& data, const std::string& dir, const AnalyzeOptions& options = {});

}  // namespace epolis::analytics
