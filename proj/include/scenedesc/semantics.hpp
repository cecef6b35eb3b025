#pragma once

// Stories (semantic hierarchies whose leaves constrain segment attributes),
// the read-only library / writable session memory pair, and matching of a
// scene description against stored stories.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "scenedesc/descriptor.hpp"
#include "scenedesc/error.hpp"

namespace scenedesc {

enum class Attribute { AreaFraction, MeanIntensity, Nx, Ny };

inline constexpr std::string_view attribute_name(Attribute a) {
  switch (a) {
    case Attribute::AreaFraction: return "area_fraction";
    case Attribute::MeanIntensity: return "mean_intensity";
    case Attribute::Nx: return "nx";
    case Attribute::Ny: return "ny";
  }
  return "?";
}

inline std::optional<Attribute> attribute_from_name(std::string_view s) {
  for (auto a : {Attribute::AreaFraction, Attribute::MeanIntensity, Attribute::Nx, Attribute::Ny})
    if (attribute_name(a) == s) return a;
  return std::nullopt;
}

inline constexpr double attribute_upper_bound(Attribute a) { return a == Attribute::MeanIntensity ? 255.0 : 1.0; }

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

struct LeafPattern {
  std::string name;
  std::map<Attribute, Range> constraints;
  friend bool operator==(const LeafPattern&, const LeafPattern&) = default;
};

struct StoryNode {
  std::string path;  // dotted indices, e.g. "0.1.2"
  std::string label;
  bool leaf = false;
  friend bool operator==(const StoryNode&, const StoryNode&) = default;
};

struct Requirement {
  std::string subject;
  Predicate predicate = Predicate::Adjacent;
  std::string object;
  friend bool operator==(const Requirement&, const Requirement&) = default;
};

/// Nodes are kept in declaration order; `leaves` follows the order of the
/// LEAF lines and is the order in which leaves are assigned.
struct Story {
  std::string id;
  std::vector<StoryNode> nodes;
  std::vector<LeafPattern> leaves;
  std::vector<Requirement> relations;
  std::optional<double> sigma;

  const std::string& root_label() const { return nodes.front().label; }

  LeafPattern* find_leaf(std::string_view name) {
    auto it = std::ranges::find(leaves, name, &LeafPattern::name);
    return it == leaves.end() ? nullptr : &*it;
  }
  const LeafPattern* find_leaf(std::string_view name) const {
    auto it = std::ranges::find(leaves, name, &LeafPattern::name);
    return it == leaves.end() ? nullptr : &*it;
  }

  friend bool operator==(const Story&, const Story&) = default;
};

// ---------------------------------------------------------------------------
// Story text

namespace detail {

inline std::string format_shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error("cannot format value");
  return std::string(buf, end);
}

inline bool valid_path(std::string_view p) {
  if (p.empty()) return false;
  bool digit = false;
  for (char c : p) {
    if (c == '.') {
      if (!digit) return false;
      digit = false;
    } else if (c >= '0' && c <= '9') {
      digit = true;
    } else {
      return false;
    }
  }
  return digit;
}

inline std::string parent_path(std::string_view p) {
  const auto dot = p.rfind('.');
  return dot == std::string_view::npos ? std::string() : std::string(p.substr(0, dot));
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

}  // namespace detail

inline std::string serialize_story(const Story& s) {
  std::string out = "STORY " + s.id + "\n";
  for (const auto& n : s.nodes) out += (n.leaf ? "LEAF " : "NODE ") + n.path + " " + n.label + "\n";
  for (const auto& leaf : s.leaves)
    for (const auto& [attr, r] : leaf.constraints)
      out += "CONSTRAIN " + leaf.name + " " + std::string(attribute_name(attr)) + " " +
             detail::format_shortest(r.lo) + " " + detail::format_shortest(r.hi) + "\n";
  for (const auto& r : s.relations)
    out += "REQUIRE " + r.subject + " " + std::string(predicate_name(r.predicate)) + " " + r.object + "\n";
  if (s.sigma) out += "SIGMA " + detail::format_shortest(*s.sigma) + "\n";
  out += "END\n";
  return out;
}

/// Parse zero or more STORY ... END blocks. Blank lines and '#' comment lines
/// are allowed between blocks.
inline std::vector<Story> parse_stories(std::string_view text, const std::string& source = "<text>") {
  std::vector<Story> stories;
  std::optional<Story> cur;
  std::set<std::string> paths;
  std::size_t ln = 0;
  std::size_t start = 0;

  auto fail = [&](std::string field, const std::string& what) -> void {
    const std::string where = source + (cur ? " story '" + cur->id + "'" : std::string());
    throw ParseError(std::move(field), where + ": " + what, ln);
  };
  auto number = [&](std::string_view tok, const char* field) {
    double v{};
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size() || !std::isfinite(v))
      fail(field, "expected a number, got '" + std::string(tok) + "'");
    return v;
  };

  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++ln;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0].starts_with('#')) continue;
    const auto kw = tok[0];
    auto arity = [&](std::size_t n) {
      if (tok.size() != n) fail(std::string(kw), "expected " + std::to_string(n - 1) + " arguments");
    };

    if (kw == "STORY") {
      if (cur) fail("STORY", "nested STORY (missing END)");
      arity(2);
      cur = Story{};
      cur->id = std::string(tok[1]);
      paths.clear();
      continue;
    }
    if (!cur) fail(std::string(kw), "keyword outside a STORY block");

    if (kw == "NODE" || kw == "LEAF") {
      arity(3);
      const std::string path(tok[1]);
      if (!detail::valid_path(path)) fail(std::string(kw), "invalid path '" + path + "'");
      if (paths.contains(path)) fail(std::string(kw), "duplicate path '" + path + "'");
      const auto parent = detail::parent_path(path);
      if (parent.empty()) {
        if (!cur->nodes.empty()) fail(std::string(kw), "second root '" + path + "'");
        if (kw == "LEAF") fail("LEAF", "root cannot be a leaf");
      } else {
        auto it = std::ranges::find(cur->nodes, parent, &StoryNode::path);
        if (it == cur->nodes.end()) fail(std::string(kw), "parent '" + parent + "' not declared");
        if (it->leaf) fail(std::string(kw), "parent '" + parent + "' is a leaf");
      }
      paths.insert(path);
      cur->nodes.push_back({path, std::string(tok[2]), kw == "LEAF"});
      if (kw == "LEAF") {
        if (cur->find_leaf(tok[2])) fail("LEAF", "duplicate leaf name '" + std::string(tok[2]) + "'");
        cur->leaves.push_back({std::string(tok[2]), {}});
      }
    } else if (kw == "CONSTRAIN") {
      arity(5);
      auto* leaf = cur->find_leaf(tok[1]);
      if (!leaf) fail("CONSTRAIN", "unknown leaf '" + std::string(tok[1]) + "'");
      const auto attr = attribute_from_name(tok[2]);
      if (!attr) fail(std::string(tok[2]), "unknown attribute");
      const Range r{number(tok[3], "lo"), number(tok[4], "hi")};
      if (r.lo > r.hi) fail("CONSTRAIN", "lo > hi");
      if (r.lo < 0 || r.hi > attribute_upper_bound(*attr)) fail(std::string(tok[2]), "range outside attribute domain");
      if (!leaf->constraints.emplace(*attr, r).second) fail(std::string(tok[2]), "attribute constrained twice");
    } else if (kw == "REQUIRE") {
      arity(4);
      const auto pred = predicate_from_name(tok[2]);
      if (!pred) fail(std::string(tok[2]), "unknown predicate");
      if (!cur->find_leaf(tok[1])) fail("REQUIRE", "unknown leaf '" + std::string(tok[1]) + "'");
      if (!cur->find_leaf(tok[3])) fail("REQUIRE", "unknown leaf '" + std::string(tok[3]) + "'");
      if (tok[1] == tok[3]) fail("REQUIRE", "relation of a leaf to itself");
      cur->relations.push_back({std::string(tok[1]), *pred, std::string(tok[3])});
    } else if (kw == "SIGMA") {
      arity(2);
      const double s = number(tok[1], "SIGMA");
      if (s < 0 || s > 1) fail("SIGMA", "must be in [0,1]");
      if (cur->sigma) fail("SIGMA", "given twice");
      cur->sigma = s;
    } else if (kw == "END") {
      arity(1);
      if (cur->nodes.empty()) fail("NODE", "story has no root NODE");
      if (cur->leaves.empty()) fail("LEAF", "story has no leaves");
      stories.push_back(std::move(*cur));
      cur.reset();
    } else {
      fail(std::string(kw), "unknown keyword");
    }
  }
  if (cur) fail("END", "missing END");
  return stories;
}

inline Story parse_story(std::string_view text, const std::string& source = "<text>") {
  auto v = parse_stories(text, source);
  if (v.size() != 1) throw ParseError("STORY", source + ": expected exactly one story, found " + std::to_string(v.size()));
  return std::move(v.front());
}

// ---------------------------------------------------------------------------
// Memory

namespace detail {
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace detail

/// Immutable library plus a writable session store; story ids are unique
/// across both. Const member functions may run concurrently; mutating ones
/// need exclusive access.
class MemoryStores {
public:
  using StoryMap = std::map<std::string, Story, std::less<>>;

  MemoryStores() : library_(std::make_shared<const StoryMap>()) { recorded_checksum_ = library_checksum(); }
  explicit MemoryStores(StoryMap library)
      : library_(std::make_shared<const StoryMap>(std::move(library))) {
    recorded_checksum_ = library_checksum();
  }

  const StoryMap& library() const noexcept { return *library_; }
  const StoryMap& session() const noexcept { return session_; }

  /// Checksum of the library content as it is now.
  std::uint64_t library_checksum() const {
    std::uint64_t h = detail::fnv1a("");
    for (const auto& [id, story] : *library_) h = detail::fnv1a(serialize_story(story), h);
    return h;
  }
  /// Checksum taken at load time.
  std::uint64_t recorded_checksum() const noexcept { return recorded_checksum_; }

  bool contains(std::string_view id) const { return library_->contains(id) || session_.contains(id); }

  const Story* find(std::string_view id) const {
    if (auto it = library_->find(id); it != library_->end()) return &it->second;
    if (auto it = session_.find(id); it != session_.end()) return &it->second;
    return nullptr;
  }

  /// Every story, library first then session, each ordered by id.
  std::vector<const Story*> all() const {
    std::vector<const Story*> out;
    for (const auto& [id, s] : *library_) out.push_back(&s);
    for (const auto& [id, s] : session_) out.push_back(&s);
    return out;
  }

  void add_to_session(Story s) {
    if (contains(s.id)) throw Error("duplicate story id '" + s.id + "'");
    const std::string id = s.id;
    session_.emplace(id, std::move(s));
  }

  Story take_from_session(std::string_view id) {
    auto it = session_.find(id);
    if (it == session_.end()) throw Error("story '" + std::string(id) + "' is not in session memory");
    Story s = std::move(it->second);
    session_.erase(it);
    return s;
  }

private:
  std::shared_ptr<const StoryMap> library_;
  StoryMap session_;
  std::uint64_t recorded_checksum_ = 0;
};

/// Parse every file into a frozen library with an empty session.
inline MemoryStores load_library(const std::vector<std::filesystem::path>& files) {
  MemoryStores::StoryMap lib;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw Error("cannot open story file " + f.string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    for (auto& s : parse_stories(text, f.string())) {
      if (lib.contains(s.id)) throw ParseError("STORY", f.string() + ": duplicate story id '" + s.id + "'");
      const std::string id = s.id;
      lib.emplace(id, std::move(s));
    }
  }
  return MemoryStores(std::move(lib));
}

/// All `*.story` files directly inside `dir`, sorted by file name.
inline std::vector<std::filesystem::path> story_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".story") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

/// Copy a story from outside into session memory. The library is untouched.
inline const Story& horizontal_import(MemoryStores& m, std::string_view story_text) {
  Story s = parse_story(story_text, "<import>");
  const std::string id = s.id;
  m.add_to_session(std::move(s));
  return *m.find(id);
}

/// Independent copy of a stored story; the stored original stays in place.
inline Story recall_copy(const MemoryStores& m, std::string_view id) {
  const Story* s = m.find(id);
  if (!s) throw Error("unknown story id '" + std::string(id) + "'");
  return *s;
}

/// Append a session story to a library file and drop it from the session.
inline Story promote(MemoryStores& m, std::string_view id, const std::filesystem::path& target) {
  if (!m.session().contains(id)) throw Error("story '" + std::string(id) + "' is not in session memory");
  const auto text = serialize_story(m.session().find(id)->second);
  {
    std::ofstream out(target, std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot open " + target.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw Error("write failed: " + target.string());
  }
  return m.take_from_session(id);
}

// ---------------------------------------------------------------------------
// Matching

/// 1 inside [lo, hi], decaying linearly to 0 at one range width outside.
inline double range_fit(double value, const Range& r) {
  if (value >= r.lo && value <= r.hi) return 1.0;
  const double width = r.hi - r.lo;
  if (width <= 0.0) return 0.0;
  const double dist = value < r.lo ? r.lo - value : value - r.hi;
  return std::max(0.0, 1.0 - dist / width);
}

inline double attribute_value(const SegmentRecord& s, Attribute a, std::size_t level_pixels) {
  switch (a) {
    case Attribute::AreaFraction: return static_cast<double>(s.area) / static_cast<double>(level_pixels);
    case Attribute::MeanIntensity: return s.mean;
    case Attribute::Nx: return s.nx;
    case Attribute::Ny: return s.ny;
  }
  return 0.0;
}

inline double leaf_compatibility(const LeafPattern& leaf, const SegmentRecord& s, std::size_t level_pixels) {
  double c = 1.0;
  for (const auto& [attr, r] : leaf.constraints) c *= range_fit(attribute_value(s, attr, level_pixels), r);
  return c;
}

inline constexpr double kViolationFactor = 0.25;
inline constexpr std::size_t kExhaustiveLeafLimit = 8;
inline constexpr int kUnassigned = -1;

/// Required relation between leaf indices.
struct LeafRelation {
  std::size_t subject;
  Predicate predicate;
  std::size_t object;
};

struct Assignment {
  std::vector<int> segment_of_leaf;  // column index, or kUnassigned
  double score = 0.0;
  bool exhaustive = true;
};

/// Score of a complete assignment: mean leaf compatibility times 0.25 per
/// violated required relation. Unassigned leaves contribute 0 and violate
/// every relation they take part in.
template <class Holds>
double assignment_score(const std::vector<std::vector<double>>& compat, const std::vector<LeafRelation>& reqs,
                        const std::vector<int>& seg, Holds&& holds) {
  double sum = 0.0;
  for (std::size_t i = 0; i < seg.size(); ++i)
    if (seg[i] != kUnassigned) sum += compat[i][static_cast<std::size_t>(seg[i])];
  int violations = 0;
  for (const auto& r : reqs) {
    const int a = seg[r.subject], b = seg[r.object];
    if (a == kUnassigned || b == kUnassigned || !holds(a, r.predicate, b)) ++violations;
  }
  return sum / static_cast<double>(seg.size()) * std::pow(kViolationFactor, violations);
}

/// Best injective leaf -> column mapping for a leaves x columns compatibility
/// matrix. Up to kExhaustiveLeafLimit leaves the search is exhaustive
/// (branch and bound; among equal scores the lexicographically first
/// assignment, columns ascending then unassigned, wins). Larger stories use
/// greedy best-first pairing.
template <class Holds>
Assignment solve_assignment(const std::vector<std::vector<double>>& compat, const std::vector<LeafRelation>& reqs,
                            std::size_t columns, Holds&& holds) {
  const std::size_t n = compat.size();
  Assignment best;
  best.segment_of_leaf.assign(n, kUnassigned);
  if (n == 0) return best;

  if (n > kExhaustiveLeafLimit) {
    best.exhaustive = false;
    std::vector<bool> leaf_done(n, false), col_used(columns, false);
    for (std::size_t step = 0; step < std::min(n, columns); ++step) {
      double top = -1.0;
      std::size_t bl = 0, bc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (leaf_done[i]) continue;
        for (std::size_t c = 0; c < columns; ++c)
          if (!col_used[c] && compat[i][c] > top) {
            top = compat[i][c];
            bl = i;
            bc = c;
          }
      }
      leaf_done[bl] = true;
      col_used[bc] = true;
      best.segment_of_leaf[bl] = static_cast<int>(bc);
    }
    best.score = assignment_score(compat, reqs, best.segment_of_leaf, holds);
    return best;
  }

  // Requirements become checkable once their later endpoint is assigned.
  std::vector<std::vector<const LeafRelation*>> due(n);
  for (const auto& r : reqs) due[std::max(r.subject, r.object)].push_back(&r);
  std::vector<double> suffix_max(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double m = 0.0;
    for (double v : compat[i]) m = std::max(m, v);
    suffix_max[i] = suffix_max[i + 1] + m;
  }

  std::vector<int> seg(n, kUnassigned);
  std::vector<bool> used(columns, false);
  double best_score = -1.0;
  const double slack = 1e-12;

  auto recurse = [&](auto& self, std::size_t leaf, double sum, int violations) -> void {
    if (leaf == n) {
      const double score = sum / static_cast<double>(n) * std::pow(kViolationFactor, violations);
      if (score > best_score) {
        best_score = score;
        best.segment_of_leaf = seg;
      }
      return;
    }
    const double bound = (sum + suffix_max[leaf]) / static_cast<double>(n) * std::pow(kViolationFactor, violations);
    if (bound < best_score - slack) return;

    auto try_column = [&](int c) {
      seg[leaf] = c;
      int v = violations;
      for (const auto* r : due[leaf]) {
        const int a = seg[r->subject], b = seg[r->object];
        if (a == kUnassigned || b == kUnassigned || !holds(a, r->predicate, b)) ++v;
      }
      self(self, leaf + 1, c == kUnassigned ? sum : sum + compat[leaf][static_cast<std::size_t>(c)], v);
      seg[leaf] = kUnassigned;
    };
    for (std::size_t c = 0; c < columns; ++c) {
      if (used[c]) continue;
      used[c] = true;
      try_column(static_cast<int>(c));
      used[c] = false;
    }
    try_column(kUnassigned);
  };
  recurse(recurse, 0, 0.0, 0);
  best.score = best_score;
  return best;
}

struct SituationBlindness {
  friend bool operator==(const SituationBlindness&, const SituationBlindness&) = default;
};

struct StoryMatch {
  std::string story_id;
  double score = 0.0;
  std::map<std::string, SegmentId> assignment;  // leaf name -> segment id
  friend bool operator==(const StoryMatch&, const StoryMatch&) = default;
};

using Interpretation = std::variant<SituationBlindness, StoryMatch>;

/// Match one story against one description level.
inline std::pair<Assignment, std::vector<SegmentId>> match_story(const Story& story, const LevelDescription& level) {
  const std::size_t pixels = static_cast<std::size_t>(level.width) * static_cast<std::size_t>(level.height);
  std::vector<std::vector<double>> compat;
  for (const auto& leaf : story.leaves) {
    auto& row = compat.emplace_back();
    for (const auto& s : level.segments) row.push_back(leaf_compatibility(leaf, s, pixels));
  }
  std::vector<LeafRelation> reqs;
  auto leaf_index = [&](const std::string& name) {
    return static_cast<std::size_t>(std::ranges::find(story.leaves, name, &LeafPattern::name) - story.leaves.begin());
  };
  for (const auto& r : story.relations) reqs.push_back({leaf_index(r.subject), r.predicate, leaf_index(r.object)});

  std::vector<SegmentId> ids;
  for (const auto& s : level.segments) ids.push_back(s.id);
  auto holds = [&](int a, Predicate p, int b) {
    RelationTriple t{ids[static_cast<std::size_t>(a)], p, ids[static_cast<std::size_t>(b)]};
    if (p == Predicate::Adjacent && t.subject > t.object) std::swap(t.subject, t.object);
    return std::binary_search(level.relations.begin(), level.relations.end(), t);
  };
  return {solve_assignment(compat, reqs, ids.size(), holds), ids};
}

/// Best story whose score reaches its threshold (the story's SIGMA if set,
/// otherwise `sigma`); ties go to the smallest id. Uses the finest level.
inline Interpretation match_scene(const SceneDescription& d, const MemoryStores& m, double sigma = 0.6) {
  if (sigma < 0 || sigma > 1) throw Error("sigma must be in [0,1]");
  if (d.levels.empty()) return SituationBlindness{};
  const auto& level = d.finest();

  std::optional<StoryMatch> winner;
  std::vector<const Story*> stories = m.all();
  std::sort(stories.begin(), stories.end(), [](const Story* a, const Story* b) { return a->id < b->id; });
  for (const Story* story : stories) {
    auto [a, ids] = match_story(*story, level);
    if (a.score < story->sigma.value_or(sigma)) continue;
    if (winner && a.score <= winner->score) continue;
    StoryMatch sm{story->id, a.score, {}};
    for (std::size_t i = 0; i < story->leaves.size(); ++i)
      if (a.segment_of_leaf[i] != kUnassigned)
        sm.assignment[story->leaves[i].name] = ids[static_cast<std::size_t>(a.segment_of_leaf[i])];
    winner = std::move(sm);
  }
  if (!winner) return SituationBlindness{};
  return *winner;
}

}  // namespace scenedesc
