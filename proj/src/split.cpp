#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>

#include <fmt/format.h>
#include <json.hpp>

#include "mycoeval/dataset.hpp"
#include "mycoeval/error.hpp"
#include "mycoeval/random.hpp"

namespace mycoeval {

namespace {

// Floor with slack for products such as 2540 * 0.8 landing a hair above or
// below an integer.
double robust_floor(double x) { return std::floor(x + 1e-9); }

void validate_fractions(const SplitFractions& f) {
  double sum = 0.0;
  for (double v : f) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::kUsage, "split fractions must be non-negative");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorKind::kUsage, fmt::format("split fractions sum to {}, not 1", sum));
  }
}

// Assigns the leftover unit of each fractional cell so that row sums are the
// stratum sizes and column sums hit `column_targets`. Leftovers are a
// bipartite b-matching between strata and splits, solved by a greedy pass
// followed by augmenting paths.
void distribute_leftovers(const std::vector<std::array<double, 3>>& exact,
                          std::vector<std::array<std::size_t, 3>>& cells,
                          const std::array<std::size_t, 3>& column_targets, Warnings* warnings) {
  const std::size_t strata = exact.size();
  std::vector<std::array<bool, 3>> extra(strata, {false, false, false});
  std::vector<long> row_left(strata);
  std::array<long, 3> col_left{};
  for (std::size_t s = 0; s < strata; ++s) {
    double total = 0.0;
    std::size_t floored = 0;
    for (int k = 0; k < 3; ++k) {
      total += exact[s][k];
      floored += cells[s][k];
    }
    row_left[s] = std::lround(total) - static_cast<long>(floored);
  }
  for (int k = 0; k < 3; ++k) {
    std::size_t used = 0;
    for (std::size_t s = 0; s < strata; ++s) used += cells[s][k];
    col_left[k] = static_cast<long>(column_targets[k]) - static_cast<long>(used);
  }
  auto fractional = [&](std::size_t s, int k) {
    return exact[s][k] - static_cast<double>(cells[s][k]) > 1e-9;
  };

  struct Cell {
    double remainder;
    std::size_t s;
    int k;
  };
  std::vector<Cell> order;
  for (std::size_t s = 0; s < strata; ++s) {
    for (int k = 0; k < 3; ++k) {
      if (fractional(s, k)) order.push_back({exact[s][k] - cells[s][k], s, k});
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const Cell& a, const Cell& b) { return a.remainder > b.remainder; });
  for (const auto& c : order) {
    if (row_left[c.s] > 0 && col_left[c.k] > 0) {
      extra[c.s][c.k] = true;
      --row_left[c.s];
      --col_left[c.k];
    }
  }

  // Augmenting paths: stratum -(unused cell)-> split -(used cell)-> stratum ...
  for (std::size_t start = 0; start < strata; ++start) {
    while (row_left[start] > 0) {
      std::vector<int> split_parent(3, -1);
      std::vector<int> stratum_parent(strata, -2);
      std::queue<std::size_t> queue;
      queue.push(start);
      stratum_parent[start] = -1;
      int found = -1;
      while (!queue.empty() && found < 0) {
        const std::size_t s = queue.front();
        queue.pop();
        for (int k = 0; k < 3 && found < 0; ++k) {
          if (extra[s][k] || !fractional(s, k) || split_parent[k] >= 0) continue;
          split_parent[k] = static_cast<int>(s);
          if (col_left[k] > 0) {
            found = k;
            break;
          }
          for (std::size_t s2 = 0; s2 < strata; ++s2) {
            if (extra[s2][k] && stratum_parent[s2] == -2) {
              stratum_parent[s2] = k;
              queue.push(s2);
            }
          }
        }
      }
      if (found < 0) break;
      int k = found;
      --col_left[k];
      --row_left[start];
      for (;;) {
        const auto s = static_cast<std::size_t>(split_parent[k]);
        extra[s][k] = true;
        if (s == start) break;
        const int prev_k = stratum_parent[s];
        extra[s][prev_k] = false;
        k = prev_k;
      }
    }
  }

  // No exact rounding exists with these column targets; keep row sums
  // exact and place what is left where split totals still have room.
  for (std::size_t s = 0; s < strata; ++s) {
    while (row_left[s] > 0) {
      const int k = static_cast<int>(std::max_element(col_left.begin(), col_left.end()) -
                                     col_left.begin());
      if (warnings) {
        warnings->push_back(fmt::format("stratum {} needed a non-proportional placement", s));
      }
      ++cells[s][k];
      --row_left[s];
      --col_left[k];
    }
  }
  for (std::size_t s = 0; s < strata; ++s) {
    for (int k = 0; k < 3; ++k) cells[s][k] += extra[s][k] ? 1 : 0;
  }
}

}  // namespace

int presence_stratum(const ImageRecord& record) {
  return (record.has_class_gt(ClassId::kFungal) ? 2 : 0) +
         (record.has_class_gt(ClassId::kArtefact) ? 1 : 0);
}

std::string presence_stratum_name(int stratum) {
  return fmt::format("fungal={} artefact={}", (stratum & 2) ? 1 : 0, (stratum & 1) ? 1 : 0);
}

std::array<std::size_t, 3> largest_remainder(std::size_t total, const SplitFractions& fractions) {
  validate_fractions(fractions);
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = static_cast<double>(total) * fractions[k];
    counts[k] = static_cast<std::size_t>(robust_floor(exact));
    remainders[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainders[a] > remainders[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[order[i % 3]];
  return counts;
}

SplitAssignment stratified_split(const Dataset& dataset, const SplitFractions& fractions,
                                 std::uint64_t seed, Warnings* warnings,
                                 const StratumFn& stratum) {
  validate_fractions(fractions);
  if (dataset.empty()) throw Error(ErrorKind::kUsage, "cannot split an empty dataset");

  std::map<int, std::vector<std::string>> bins;
  for (const auto& r : dataset.records()) bins[stratum(r)].push_back(r.image_id);

  const int parts = static_cast<int>(
      std::count_if(fractions.begin(), fractions.end(), [](double f) { return f > 0.0; }));
  std::vector<std::array<double, 3>> exact;
  std::vector<std::array<std::size_t, 3>> cells;
  for (auto& [key, ids] : bins) {
    std::sort(ids.begin(), ids.end());
    if (static_cast<int>(ids.size()) < parts && warnings) {
      warnings->push_back(fmt::format("stratum {} has {} image(s), fewer than {} split parts",
                                      key, ids.size(), parts));
    }
    std::array<double, 3> e{};
    std::array<std::size_t, 3> c{};
    for (int k = 0; k < 3; ++k) {
      e[k] = static_cast<double>(ids.size()) * fractions[k];
      c[k] = static_cast<std::size_t>(robust_floor(e[k]));
    }
    exact.push_back(e);
    cells.push_back(c);
  }
  distribute_leftovers(exact, cells, largest_remainder(dataset.size(), fractions), warnings);

  SplitAssignment out;
  out.seed = seed;
  out.fractions = fractions;
  std::array<std::vector<std::string>*, 3> dest{&out.train, &out.val, &out.test};
  std::size_t row = 0;
  for (auto& [key, ids] : bins) {
    Stream rng(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(key)));
    rng.shuffle(std::span<std::string>(ids));
    StratumRow stats;
    stats.stratum = key;
    stats.total = ids.size();
    std::size_t cursor = 0;
    for (int k = 0; k < 3; ++k) {
      stats.counts[k] = cells[row][k];
      for (std::size_t i = 0; i < cells[row][k]; ++i) dest[k]->push_back(ids[cursor++]);
    }
    out.strata.push_back(stats);
    ++row;
  }
  for (auto* d : dest) std::sort(d->begin(), d->end());
  return out;
}

std::string serialize_split(const SplitAssignment& split) {
  nlohmann::ordered_json doc;
  doc["seed"] = split.seed;
  doc["fractions"] = split.fractions;
  doc["train"] = split.train;
  doc["val"] = split.val;
  doc["test"] = split.test;
  nlohmann::ordered_json strata = nlohmann::ordered_json::array();
  for (const auto& s : split.strata) {
    strata.push_back({{"stratum", s.stratum},
                      {"total", s.total},
                      {"train", s.counts[0]},
                      {"val", s.counts[1]},
                      {"test", s.counts[2]}});
  }
  doc["strata"] = strata;
  return doc.dump(2) + "\n";
}

}  // namespace mycoeval
