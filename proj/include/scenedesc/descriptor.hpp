#pragma once

// Attribute registry, topology relations and the canonical text form of a
// multi-level scene description.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "scenedesc/error.hpp"
#include "scenedesc/raster.hpp"
#include "scenedesc/segmenter.hpp"

namespace scenedesc {

struct SegmentRecord {
  SegmentId id = 0;
  std::size_t level = 0;
  std::optional<SegmentId> parent;
  std::size_t birth = 0;
  double nx = 0.5;  // centroid, normalized by (dim - 1)
  double ny = 0.5;
  std::size_t area = 0;
  std::size_t perimeter = 0;  // crack edges, image border included
  double mean = 0.0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive bbox

  friend bool operator==(const SegmentRecord&, const SegmentRecord&) = default;
};

// Declared in lexicographic order of the names, so enum order is name order.
enum class Predicate { Above, Adjacent, Below, Inside, LeftOf, RightOf };

inline constexpr std::string_view predicate_name(Predicate p) {
  switch (p) {
    case Predicate::Above: return "ABOVE";
    case Predicate::Adjacent: return "ADJACENT";
    case Predicate::Below: return "BELOW";
    case Predicate::Inside: return "INSIDE";
    case Predicate::LeftOf: return "LEFT-OF";
    case Predicate::RightOf: return "RIGHT-OF";
  }
  return "?";
}

inline std::optional<Predicate> predicate_from_name(std::string_view s) {
  for (auto p : {Predicate::Above, Predicate::Adjacent, Predicate::Below, Predicate::Inside,
                 Predicate::LeftOf, Predicate::RightOf})
    if (predicate_name(p) == s) return p;
  return std::nullopt;
}

struct RelationTriple {
  SegmentId subject = 0;
  Predicate predicate = Predicate::Adjacent;
  SegmentId object = 0;

  friend auto operator<=>(const RelationTriple&, const RelationTriple&) = default;
};

struct LevelDescription {
  std::size_t index = 0;
  int width = 0;
  int height = 0;
  std::vector<SegmentRecord> segments;
  std::vector<RelationTriple> relations;

  friend bool operator==(const LevelDescription&, const LevelDescription&) = default;
};

/// Levels are stored coarse to fine (pyramid index strictly decreasing).
/// `amin == 0` records the scale-relative default.
struct SceneDescription {
  int width = 0;
  int height = 0;
  int theta = 16;
  int amin = 0;
  std::vector<LevelDescription> levels;

  const LevelDescription& finest() const {
    if (levels.empty()) throw Error("scene description has no levels");
    return levels.back();
  }

  friend bool operator==(const SceneDescription&, const SceneDescription&) = default;
};

namespace detail {

using EdgeCounts = std::map<std::pair<SegmentId, SegmentId>, std::size_t>;

// Crack edges shared by each pair of labels, keyed with first < second.
inline EdgeCounts shared_edges(const LabelMap& lm) {
  EdgeCounts counts;
  for (int y = 0; y < lm.height; ++y)
    for (int x = 0; x < lm.width; ++x) {
      const auto a = lm.at(x, y);
      if (x + 1 < lm.width && lm.at(x + 1, y) != a) ++counts[std::minmax(a, lm.at(x + 1, y))];
      if (y + 1 < lm.height && lm.at(x, y + 1) != a) ++counts[std::minmax(a, lm.at(x, y + 1))];
    }
  return counts;
}

inline double normalized(double coord, int dim) { return dim == 1 ? 0.5 : coord / (dim - 1); }

}  // namespace detail

/// One record per label present in `s`, ascending id.
inline std::vector<SegmentRecord> extract_attributes(const LevelState& s, const Raster& r) {
  const auto& lm = s.labelmap;
  if (r.width() != lm.width || r.height() != lm.height)
    throw DimensionMismatch("extract_attributes: raster and label map differ in size");

  const auto n_ids = static_cast<std::size_t>(lm.next_id);
  struct Acc {
    std::size_t area = 0, perimeter = 0;
    std::int64_t sum_x = 0, sum_y = 0, sum_v = 0;
    int x0 = std::numeric_limits<int>::max(), y0 = std::numeric_limits<int>::max(), x1 = -1, y1 = -1;
  };
  std::vector<Acc> acc(n_ids);
  for (int y = 0; y < lm.height; ++y)
    for (int x = 0; x < lm.width; ++x) {
      const auto l = lm.at(x, y);
      auto& a = acc[static_cast<std::size_t>(l)];
      ++a.area;
      a.sum_x += x;
      a.sum_y += y;
      a.sum_v += r.at(x, y);
      a.x0 = std::min(a.x0, x);
      a.y0 = std::min(a.y0, y);
      a.x1 = std::max(a.x1, x);
      a.y1 = std::max(a.y1, y);
      a.perimeter += (x == 0 || lm.at(x - 1, y) != l) + (x + 1 == lm.width || lm.at(x + 1, y) != l) +
                     (y == 0 || lm.at(x, y - 1) != l) + (y + 1 == lm.height || lm.at(x, y + 1) != l);
    }

  std::vector<SegmentRecord> out;
  for (std::size_t id = 0; id < n_ids; ++id) {
    const auto& a = acc[id];
    if (a.area == 0) continue;
    const double n = static_cast<double>(a.area);
    SegmentRecord rec;
    rec.id = static_cast<SegmentId>(id);
    rec.level = s.level;
    rec.parent = id < s.parents.size() ? s.parents[id] : std::nullopt;
    rec.birth = id < s.births.size() ? s.births[id] : s.level;
    rec.nx = detail::normalized(static_cast<double>(a.sum_x) / n, lm.width);
    rec.ny = detail::normalized(static_cast<double>(a.sum_y) / n, lm.height);
    rec.area = a.area;
    rec.perimeter = a.perimeter;
    rec.mean = static_cast<double>(a.sum_v) / n;
    rec.x0 = a.x0;
    rec.y0 = a.y0;
    rec.x1 = a.x1;
    rec.y1 = a.y1;
    out.push_back(rec);
  }
  return out;
}

/// ADJACENT for every pair sharing a crack edge (lower id first). INSIDE(a, b)
/// when a does not touch the image border and every pixel bordering a belongs
/// to b. Other adjacent pairs get one directional predicate and its dual when
/// the centroid offset exceeds `epsilon`; horizontal wins ties.
inline std::vector<RelationTriple> derive_relations(const std::vector<SegmentRecord>& records,
                                                    const LevelState& s, double epsilon = 0.05) {
  const auto& lm = s.labelmap;
  const auto edges = detail::shared_edges(lm);

  std::map<SegmentId, const SegmentRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  auto record = [&](SegmentId id) -> const SegmentRecord& {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error("derive_relations: records do not match the level state");
    return *it->second;
  };

  std::map<SegmentId, std::set<SegmentId>> neighbours;
  for (const auto& [pair, count] : edges) {
    neighbours[pair.first].insert(pair.second);
    neighbours[pair.second].insert(pair.first);
  }
  auto touches_border = [&](SegmentId id) {
    const auto& r = record(id);
    return r.x0 == 0 || r.y0 == 0 || r.x1 == lm.width - 1 || r.y1 == lm.height - 1;
  };
  auto inside = [&](SegmentId a, SegmentId b) {
    const auto& nb = neighbours[a];
    return nb.size() == 1 && *nb.begin() == b && !touches_border(a);
  };

  std::vector<RelationTriple> out;
  for (const auto& [pair, count] : edges) {
    const auto [a, b] = pair;
    out.push_back({a, Predicate::Adjacent, b});
    const bool a_in_b = inside(a, b);
    const bool b_in_a = inside(b, a);
    if (a_in_b) out.push_back({a, Predicate::Inside, b});
    if (b_in_a) out.push_back({b, Predicate::Inside, a});
    if (a_in_b || b_in_a) continue;

    const auto& ra = record(a);
    const auto& rb = record(b);
    const double dx = rb.nx - ra.nx;
    const double dy = rb.ny - ra.ny;
    if (std::abs(dx) >= std::abs(dy) && std::abs(dx) > epsilon) {
      const auto [left, right] = dx > 0 ? std::pair{a, b} : std::pair{b, a};
      out.push_back({left, Predicate::LeftOf, right});
      out.push_back({right, Predicate::RightOf, left});
    } else if (std::abs(dy) > std::abs(dx) && std::abs(dy) > epsilon) {
      const auto [upper, lower] = dy > 0 ? std::pair{a, b} : std::pair{b, a};
      out.push_back({upper, Predicate::Above, lower});
      out.push_back({lower, Predicate::Below, upper});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline LevelDescription describe_level(const LevelState& s, const Raster& r, double epsilon = 0.05) {
  LevelDescription d{s.level, r.width(), r.height(), extract_attributes(s, r), {}};
  d.relations = derive_relations(d.segments, s, epsilon);
  return d;
}

/// Description of a hierarchy produced by build_hierarchy over `p`.
inline SceneDescription describe_hierarchy(const Pyramid& p, const std::vector<LevelState>& states,
                                           const SegConfig& cfg, double epsilon = 0.05) {
  SceneDescription d;
  d.width = p.level(0).width();
  d.height = p.level(0).height();
  d.theta = cfg.theta;
  d.amin = cfg.a_min.value_or(0);
  for (const auto& s : states) d.levels.push_back(describe_level(s, p.level(s.level), epsilon));
  return d;
}

// ---------------------------------------------------------------------------
// Canonical text

/// Fixed 4-decimal formatting; exact binary ties round half to even.
inline std::string format_fixed4(double v) {
  if (v == 0.0) v = 0.0;  // no "-0.0000"
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 4);
  if (ec != std::errc{}) throw Error("cannot format value");
  return std::string(buf, end);
}

inline std::string serialize(const SceneDescription& d) {
  std::string out;
  auto num = [](auto v) { return std::to_string(v); };
  out += "SCENE " + num(d.width) + " " + num(d.height) + " LEVELS " + num(d.levels.size()) + " THETA " +
         num(d.theta) + " AMIN " + num(d.amin) + "\n";
  for (const auto& lv : d.levels) {
    out += "LEVEL " + num(lv.index) + " SIZE " + num(lv.width) + "x" + num(lv.height) + "\n";
    for (const auto& s : lv.segments) {
      out += "SEG " + num(s.id) + " PARENT " + (s.parent ? num(*s.parent) : std::string("-")) + " BIRTH " +
             num(s.birth) + " CENTROID " + format_fixed4(s.nx) + " " + format_fixed4(s.ny) + " AREA " +
             num(s.area) + " PERIM " + num(s.perimeter) + " MEAN " + format_fixed4(s.mean) + " BBOX " +
             num(s.x0) + " " + num(s.y0) + " " + num(s.x1) + " " + num(s.y1) + "\n";
    }
    for (const auto& r : lv.relations)
      out += "REL " + num(r.subject) + " " + std::string(predicate_name(r.predicate)) + " " + num(r.object) + "\n";
  }
  return out;
}

namespace detail {

class LineTokens {
public:
  LineTokens(std::string_view line, std::size_t line_no) : line_no_(line_no) {
    std::size_t start = 0;
    for (;;) {
      const auto sp = line.find(' ', start);
      const auto tok = line.substr(start, sp == std::string_view::npos ? std::string_view::npos : sp - start);
      if (tok.empty()) throw ParseError(std::string(line.substr(0, 8)), "empty token (tokens are separated by single spaces)", line_no);
      tokens_.push_back(tok);
      if (sp == std::string_view::npos) break;
      start = sp + 1;
    }
  }

  std::size_t line() const noexcept { return line_no_; }
  bool done() const noexcept { return pos_ == tokens_.size(); }

  std::string_view next(std::string_view field) {
    if (done()) throw ParseError(std::string(field), "missing value", line_no_);
    return tokens_[pos_++];
  }

  void keyword(std::string_view kw) {
    const auto t = next(kw);
    if (t != kw) {
      if (t == "COLOR") throw ParseError("COLOR", "reserved keyword, not supported in this version", line_no_);
      throw ParseError(std::string(t), "expected keyword " + std::string(kw), line_no_);
    }
  }

  template <class Int>
  Int integer(std::string_view field) {
    const auto t = next(field);
    Int v{};
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size())
      throw ParseError(std::string(field), "expected an integer, got '" + std::string(t) + "'", line_no_);
    return v;
  }

  double real(std::string_view field) {
    const auto t = next(field);
    double v{};
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v, std::chars_format::fixed);
    if (ec != std::errc{} || p != t.data() + t.size() || !std::isfinite(v))
      throw ParseError(std::string(field), "expected a decimal number, got '" + std::string(t) + "'", line_no_);
    return v;
  }

  void end() {
    if (!done()) throw ParseError(std::string(tokens_[pos_]), "unexpected trailing token", line_no_);
  }

private:
  std::vector<std::string_view> tokens_;
  std::size_t pos_ = 0;
  std::size_t line_no_;
};

// Splits LF-terminated text; the final line must end with LF.
inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos)
      throw ParseError("EOF", "last line is not terminated by LF", lines.size() + 1);
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

}  // namespace detail

/// Strict parser for the canonical grammar written by serialize().
inline SceneDescription parse(std::string_view text) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ParseError("SCENE", "empty description", 1);

  SceneDescription d;
  std::size_t declared_levels = 0;
  {
    detail::LineTokens t(lines[0], 1);
    t.keyword("SCENE");
    d.width = t.integer<int>("width");
    d.height = t.integer<int>("height");
    t.keyword("LEVELS");
    declared_levels = t.integer<std::size_t>("LEVELS");
    t.keyword("THETA");
    d.theta = t.integer<int>("THETA");
    t.keyword("AMIN");
    d.amin = t.integer<int>("AMIN");
    t.end();
    if (d.width < 1) throw ParseError("width", "must be >= 1", 1);
    if (d.height < 1) throw ParseError("height", "must be >= 1", 1);
    if (d.theta < 1) throw ParseError("THETA", "must be >= 1", 1);
    if (d.amin < 0) throw ParseError("AMIN", "must be >= 0", 1);
  }

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t ln = i + 1;
    if (lines[i].find('\r') != std::string_view::npos) throw ParseError("CR", "carriage return not allowed", ln);
    detail::LineTokens t(lines[i], ln);
    const auto kw = t.next("keyword");

    if (kw == "LEVEL") {
      LevelDescription lv;
      lv.index = t.integer<std::size_t>("LEVEL");
      t.keyword("SIZE");
      const auto size = t.next("SIZE");
      t.end();
      const auto x = size.find('x');
      if (x == std::string_view::npos) throw ParseError("SIZE", "expected <w>x<h>", ln);
      auto parse_dim = [&](std::string_view s) {
        int v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size() || v < 1)
          throw ParseError("SIZE", "invalid dimension '" + std::string(s) + "'", ln);
        return v;
      };
      lv.width = parse_dim(size.substr(0, x));
      lv.height = parse_dim(size.substr(x + 1));
      if (!d.levels.empty() && lv.index >= d.levels.back().index)
        throw ParseError("LEVEL", "ordering violated: level indices must strictly decrease", ln);
      d.levels.push_back(std::move(lv));
    } else if (kw == "SEG") {
      if (d.levels.empty()) throw ParseError("SEG", "SEG before any LEVEL", ln);
      auto& lv = d.levels.back();
      if (!lv.relations.empty()) throw ParseError("SEG", "ordering violated: SEG after REL", ln);
      SegmentRecord s;
      s.level = lv.index;
      s.id = t.integer<SegmentId>("SEG");
      if (s.id < 0) throw ParseError("SEG", "id must be >= 0", ln);
      t.keyword("PARENT");
      const auto parent = t.next("PARENT");
      if (parent != "-") {
        SegmentId p{};
        auto [e, ec] = std::from_chars(parent.data(), parent.data() + parent.size(), p);
        if (ec != std::errc{} || e != parent.data() + parent.size() || p < 0 || p == s.id)
          throw ParseError("PARENT", "expected '-' or another segment id", ln);
        s.parent = p;
      }
      t.keyword("BIRTH");
      s.birth = t.integer<std::size_t>("BIRTH");
      if (s.birth < lv.index) throw ParseError("BIRTH", "birth level finer than the current level", ln);
      t.keyword("CENTROID");
      s.nx = t.real("CENTROID");
      s.ny = t.real("CENTROID");
      if (s.nx < 0 || s.nx > 1 || s.ny < 0 || s.ny > 1) throw ParseError("CENTROID", "outside [0,1]", ln);
      t.keyword("AREA");
      const auto area = t.integer<long long>("AREA");
      if (area < 1) throw ParseError("AREA", "must be >= 1", ln);
      s.area = static_cast<std::size_t>(area);
      t.keyword("PERIM");
      const auto perim = t.integer<long long>("PERIM");
      if (perim < 4) throw ParseError("PERIM", "must be >= 4", ln);
      s.perimeter = static_cast<std::size_t>(perim);
      t.keyword("MEAN");
      s.mean = t.real("MEAN");
      if (s.mean < 0 || s.mean > 255) throw ParseError("MEAN", "outside [0,255]", ln);
      t.keyword("BBOX");
      s.x0 = t.integer<int>("BBOX");
      s.y0 = t.integer<int>("BBOX");
      s.x1 = t.integer<int>("BBOX");
      s.y1 = t.integer<int>("BBOX");
      t.end();
      if (s.x0 < 0 || s.y0 < 0 || s.x0 > s.x1 || s.y0 > s.y1 || s.x1 >= lv.width || s.y1 >= lv.height)
        throw ParseError("BBOX", "invalid box for level size", ln);
      if (!lv.segments.empty() && s.id <= lv.segments.back().id)
        throw ParseError("SEG", "ordering violated: ids must strictly increase", ln);
      lv.segments.push_back(s);
    } else if (kw == "REL") {
      if (d.levels.empty()) throw ParseError("REL", "REL before any LEVEL", ln);
      auto& lv = d.levels.back();
      RelationTriple r;
      r.subject = t.integer<SegmentId>("subject");
      const auto pred_tok = t.next("predicate");
      const auto pred = predicate_from_name(pred_tok);
      if (!pred) throw ParseError(std::string(pred_tok), "unknown predicate", ln);
      r.predicate = *pred;
      r.object = t.integer<SegmentId>("object");
      t.end();
      auto known = [&](SegmentId id) {
        return std::ranges::binary_search(lv.segments, id, {}, &SegmentRecord::id);
      };
      if (!known(r.subject)) throw ParseError("subject", "unknown segment id", ln);
      if (!known(r.object)) throw ParseError("object", "unknown segment id", ln);
      if (r.subject == r.object) throw ParseError("object", "relation to itself", ln);
      if (!lv.relations.empty() && !(lv.relations.back() < r))
        throw ParseError("REL", "ordering violated: relations must be strictly ascending", ln);
      lv.relations.push_back(r);
    } else if (kw == "COLOR") {
      throw ParseError("COLOR", "reserved keyword, not supported in this version", ln);
    } else {
      throw ParseError(std::string(kw), "unknown keyword", ln);
    }
  }

  if (d.levels.size() != declared_levels)
    throw ParseError("LEVELS", "declared " + std::to_string(declared_levels) + " levels, found " +
                                   std::to_string(d.levels.size()), 1);
  return d;
}

/// Equality at the precision of the canonical text (4 decimals for reals).
inline bool structurally_equal(const SceneDescription& a, const SceneDescription& b) {
  return serialize(a) == serialize(b);
}

/// Paint every pixel with its segment's mean, rounded half up.
inline Raster reconstruct(const LevelState& s) {
  const auto& lm = s.labelmap;
  std::vector<std::uint8_t> out(lm.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(
        std::clamp(std::floor(s.means[static_cast<std::size_t>(lm.labels[i])] + 0.5), 0.0, 255.0));
  return Raster(lm.width, lm.height, 1, std::move(out));
}

/// Same as above but taking the means from a description level.
inline Raster reconstruct(const LevelDescription& d, const LabelMap& lm) {
  if (d.width != lm.width || d.height != lm.height)
    throw DimensionMismatch("reconstruct: description level and label map differ in size");
  std::map<SegmentId, double> means;
  for (const auto& s : d.segments) means[s.id] = s.mean;
  std::vector<std::uint8_t> out(lm.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto it = means.find(lm.labels[i]);
    if (it == means.end()) throw Error("reconstruct: label without a record");
    out[i] = static_cast<std::uint8_t>(std::clamp(std::floor(it->second + 0.5), 0.0, 255.0));
  }
  return Raster(lm.width, lm.height, 1, std::move(out));
}

// ---------------------------------------------------------------------------
// Fixations

struct Fixation {
  SegmentId id = 0;
  double nx = 0.0;
  double ny = 0.0;
  double saliency = 0.0;
};

/// Contrast-weighted boundary share per segment.
inline std::map<SegmentId, double> segment_saliency(const std::vector<SegmentRecord>& records,
                                                    const std::vector<RelationTriple>& relations,
                                                    const LevelState& s) {
  const auto edges = detail::shared_edges(s.labelmap);
  std::map<SegmentId, const SegmentRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;

  std::map<SegmentId, double> sal;
  for (const auto& r : records) sal[r.id] = 0.0;
  for (const auto& rel : relations) {
    if (rel.predicate != Predicate::Adjacent) continue;
    const auto ia = by_id.find(rel.subject);
    const auto ib = by_id.find(rel.object);
    if (ia == by_id.end() || ib == by_id.end()) throw Error("propose_fixations: relation without record");
    const auto it = edges.find(std::minmax(rel.subject, rel.object));
    const double shared = it == edges.end() ? 0.0 : static_cast<double>(it->second);
    const auto& a = *ia->second;
    const auto& b = *ib->second;
    const double contrast = std::abs(a.mean - b.mean) / 255.0;
    sal[a.id] += shared / static_cast<double>(a.perimeter) * contrast;
    sal[b.id] += shared / static_cast<double>(b.perimeter) * contrast;
  }
  return sal;
}

/// Top-`n` segments by saliency (descending, ties to lower id); zero-saliency
/// segments are never proposed.
inline std::vector<Fixation> propose_fixations(const std::vector<SegmentRecord>& records,
                                               const std::vector<RelationTriple>& relations,
                                               const LevelState& s, std::size_t n) {
  const auto sal = segment_saliency(records, relations, s);
  std::vector<Fixation> out;
  for (const auto& r : records) {
    const double v = sal.at(r.id);
    if (v > 0.0) out.push_back({r.id, r.nx, r.ny, v});
  }
  std::sort(out.begin(), out.end(), [](const Fixation& a, const Fixation& b) {
    return a.saliency != b.saliency ? a.saliency > b.saliency : a.id < b.id;
  });
  if (out.size() > n) out.resize(n);
  return out;
}

}  // namespace scenedesc
