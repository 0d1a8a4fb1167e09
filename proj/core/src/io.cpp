#include "pointcpr/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "pointcpr/errors.hpp"

namespace pointcpr {

std::string to_string(CloudFormat format) {
  switch (format) {
    case CloudFormat::xyz: return "xyz";
    case CloudFormat::ply: return "ply";
    case CloudFormat::off: return "off";
  }
  return "?";
}

CloudFormat parse_format(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "xyz") return CloudFormat::xyz;
  if (s == "ply") return CloudFormat::ply;
  if (s == "off") return CloudFormat::off;
  throw ArgumentError("unknown point cloud format '" + std::string(name) + "' (expected xyz, ply or off)");
}

CloudFormat format_from_path(std::string_view path) {
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of("/\\");
  if (dot == std::string_view::npos || (slash != std::string_view::npos && dot < slash)) {
    throw ArgumentError("cannot infer point cloud format of '" + std::string(path) + "': no extension");
  }
  return parse_format(path.substr(dot + 1));
}

namespace {

struct Line {
  std::size_t number = 0;
  std::vector<std::string_view> tokens;
};

/// Splits into whitespace-separated tokens per line, numbering from 1.
class LineReader {
 public:
  LineReader(std::string_view text, const std::string& source) : text_(text), source_(source) {}

  /// Next line with at least one token, skipping lines whose first token
  /// starts with `comment` when nonzero.
  bool next(Line& out, char comment) {
    while (pos_ < text_.size()) {
      auto end = text_.find('\n', pos_);
      if (end == std::string_view::npos) end = text_.size();
      std::string_view raw = text_.substr(pos_, end - pos_);
      pos_ = end == text_.size() ? end : end + 1;
      ++line_;
      if (raw.find('\0') != std::string_view::npos) fail(line_, "embedded NUL byte");
      out.number = line_;
      out.tokens.clear();
      std::size_t i = 0;
      while (i < raw.size()) {
        while (i < raw.size() && is_space(raw[i])) ++i;
        std::size_t j = i;
        while (j < raw.size() && !is_space(raw[j])) ++j;
        if (j > i) out.tokens.push_back(raw.substr(i, j - i));
        i = j;
      }
      if (out.tokens.empty()) continue;
      if (comment != 0 && out.tokens.front().front() == comment) continue;
      return true;
    }
    return false;
  }

  std::size_t line() const { return line_; }
  [[noreturn]] void fail(std::size_t line, const std::string& what) const { throw ParseError(source_, line, what); }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

  std::string_view text_;
  const std::string& source_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

double parse_number(const LineReader& r, std::size_t line, std::string_view tok) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) {
    r.fail(line, "expected a number, got '" + std::string(tok) + "'");
  }
  if (!std::isfinite(v)) r.fail(line, "non-finite coordinate '" + std::string(tok) + "'");
  return v;
}

std::size_t parse_count(const LineReader& r, std::size_t line, std::string_view tok, const char* what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    r.fail(line, std::string("invalid ") + what + " '" + std::string(tok) + "'");
  }
  return v;
}

// Upper bound on declared counts so a corrupt header cannot request a
// huge allocation before the data is seen.
constexpr std::size_t kMaxDeclared = std::size_t{1} << 28;

PointCloud finish(std::vector<Point3> points, const LineReader& r) {
  if (points.empty()) r.fail(std::max<std::size_t>(r.line(), 1), "no points");
  return PointCloud(std::move(points));
}

PointCloud parse_xyz(std::string_view text, const std::string& source) {
  LineReader r(text, source);
  std::vector<Point3> points;
  Line line;
  while (r.next(line, '#')) {
    if (line.tokens.size() < 3) {
      r.fail(line.number, "expected at least 3 coordinates, got " + std::to_string(line.tokens.size()));
    }
    Point3 p{};
    for (std::size_t i = 0; i < line.tokens.size(); ++i) {
      const double v = parse_number(r, line.number, line.tokens[i]);
      if (i < 3) p[i] = v;
    }
    points.push_back(p);
  }
  return finish(std::move(points), r);
}

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<std::string> properties;  // scalar property names; "" for lists
  bool has_list = false;
};

bool is_ply_scalar_type(std::string_view t) {
  static constexpr std::string_view kTypes[] = {"char",  "uchar",  "short",   "ushort",  "int",    "uint",
                                                "float", "double", "int8",    "uint8",   "int16",  "uint16",
                                                "int32", "uint32", "float32", "float64"};
  return std::find(std::begin(kTypes), std::end(kTypes), t) != std::end(kTypes);
}

PointCloud parse_ply(std::string_view text, const std::string& source) {
  LineReader r(text, source);
  Line line;
  if (!r.next(line, 0) || line.tokens.size() != 1 || line.tokens[0] != "ply") {
    r.fail(std::max<std::size_t>(line.number, 1), "missing 'ply' magic");
  }
  if (!r.next(line, 0)) r.fail(r.line(), "header truncated: missing format line");
  if (line.tokens[0] != "format") r.fail(line.number, "missing format line");
  if (line.tokens.size() != 3) r.fail(line.number, "malformed format line");
  if (line.tokens[1] != "ascii") r.fail(line.number, "unsupported PLY format '" + std::string(line.tokens[1]) + "'");
  if (line.tokens[2] != "1.0") r.fail(line.number, "unsupported PLY version '" + std::string(line.tokens[2]) + "'");

  std::vector<PlyElement> elements;
  bool ended = false;
  while (r.next(line, 0)) {
    const auto& t = line.tokens;
    if (t[0] == "comment" || t[0] == "obj_info") continue;
    if (t[0] == "end_header") {
      if (t.size() != 1) r.fail(line.number, "malformed end_header");
      ended = true;
      break;
    }
    if (t[0] == "element") {
      if (t.size() != 3) r.fail(line.number, "malformed element line");
      PlyElement e;
      e.name = std::string(t[1]);
      e.count = parse_count(r, line.number, t[2], "element count");
      if (e.count > kMaxDeclared) r.fail(line.number, "element count too large");
      elements.push_back(std::move(e));
      continue;
    }
    if (t[0] == "property") {
      if (elements.empty()) r.fail(line.number, "property before any element");
      auto& e = elements.back();
      if (t.size() == 5 && t[1] == "list") {
        if (!is_ply_scalar_type(t[2]) || !is_ply_scalar_type(t[3])) r.fail(line.number, "unknown list type");
        e.properties.emplace_back();
        e.has_list = true;
      } else if (t.size() == 3) {
        if (!is_ply_scalar_type(t[1])) r.fail(line.number, "unknown property type '" + std::string(t[1]) + "'");
        e.properties.emplace_back(t[2]);
      } else {
        r.fail(line.number, "malformed property line");
      }
      continue;
    }
    r.fail(line.number, "unexpected header keyword '" + std::string(t[0]) + "'");
  }
  if (!ended) r.fail(r.line() == 0 ? 1 : r.line(), "header truncated: missing end_header");

  const PlyElement* vertex = nullptr;
  for (const auto& e : elements) {
    if (e.name == "vertex") vertex = &e;
  }
  if (vertex == nullptr) r.fail(r.line(), "no vertex element");
  if (vertex->has_list) r.fail(r.line(), "list property on vertex element is not supported");
  std::size_t ix[3];
  const char* axes[3] = {"x", "y", "z"};
  for (int a = 0; a < 3; ++a) {
    auto it = std::find(vertex->properties.begin(), vertex->properties.end(), axes[a]);
    if (it == vertex->properties.end()) r.fail(r.line(), std::string("vertex element lacks property ") + axes[a]);
    ix[a] = static_cast<std::size_t>(it - vertex->properties.begin());
  }

  std::vector<Point3> points;
  for (const auto& e : elements) {
    for (std::size_t i = 0; i < e.count; ++i) {
      if (!r.next(line, 0)) {
        r.fail(r.line() + 1, "unexpected end of data in element '" + e.name + "' (" + std::to_string(i) + " of " +
                                 std::to_string(e.count) + " rows)");
      }
      if (&e != vertex) continue;
      if (line.tokens.size() != e.properties.size()) {
        r.fail(line.number, "vertex row has " + std::to_string(line.tokens.size()) + " values, expected " +
                                std::to_string(e.properties.size()));
      }
      Point3 p{};
      for (std::size_t k = 0; k < line.tokens.size(); ++k) {
        const double v = parse_number(r, line.number, line.tokens[k]);
        for (int a = 0; a < 3; ++a) {
          if (ix[a] == k) p[a] = v;
        }
      }
      points.push_back(p);
    }
  }
  if (r.next(line, 0)) r.fail(line.number, "trailing data after last element");
  return finish(std::move(points), r);
}

PointCloud parse_off(std::string_view text, const std::string& source) {
  LineReader r(text, source);
  Line line;
  if (!r.next(line, '#')) r.fail(1, "empty input: missing OFF header");
  const std::size_t header_line = line.number;
  if (line.tokens[0] != "OFF") r.fail(line.number, "missing 'OFF' header keyword");
  std::vector<std::string_view> counts(line.tokens.begin() + 1, line.tokens.end());
  std::size_t counts_line = line.number;
  if (counts.empty()) {
    if (!r.next(line, '#')) r.fail(header_line, "OFF header truncated: missing vertex/face/edge counts");
    counts = line.tokens;
    counts_line = line.number;
  }
  if (counts.size() != 3) r.fail(counts_line, "expected 3 counts (vertices faces edges), got " +
                                                  std::to_string(counts.size()));
  const std::size_t nv = parse_count(r, counts_line, counts[0], "vertex count");
  parse_count(r, counts_line, counts[1], "face count");
  parse_count(r, counts_line, counts[2], "edge count");
  if (nv == 0) r.fail(counts_line, "vertex count is zero");
  if (nv > kMaxDeclared) r.fail(counts_line, "vertex count too large");

  std::vector<Point3> points;
  points.reserve(std::min<std::size_t>(nv, 1 << 16));
  for (std::size_t i = 0; i < nv; ++i) {
    if (!r.next(line, '#')) {
      r.fail(r.line() + 1, "unexpected end of vertex list (" + std::to_string(i) + " of " + std::to_string(nv) + ")");
    }
    if (line.tokens.size() != 3) {
      r.fail(line.number, "vertex line needs 3 coordinates, got " + std::to_string(line.tokens.size()));
    }
    Point3 p{};
    for (int a = 0; a < 3; ++a) p[a] = parse_number(r, line.number, line.tokens[a]);
    points.push_back(p);
  }
  return finish(std::move(points), r);
}

}  // namespace

PointCloud parse_pointcloud(std::string_view text, CloudFormat format, const std::string& source) {
  switch (format) {
    case CloudFormat::xyz: return parse_xyz(text, source);
    case CloudFormat::ply: return parse_ply(text, source);
    case CloudFormat::off: return parse_off(text, source);
  }
  throw ArgumentError("unknown point cloud format");
}

PointCloud read_pointcloud(const std::string& path, std::optional<CloudFormat> format) {
  const CloudFormat f = format ? *format : format_from_path(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_pointcloud(buf.str(), f, path);
}

std::string format_pointcloud(const PointCloud& pc, CloudFormat format) {
  std::string out;
  char buf[96];
  auto point_line = [&](const Point3& p) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
    out += buf;
  };
  switch (format) {
    case CloudFormat::xyz:
      break;
    case CloudFormat::ply:
      out += "ply\nformat ascii 1.0\nelement vertex " + std::to_string(pc.size()) +
             "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
      break;
    case CloudFormat::off:
      out += "OFF\n" + std::to_string(pc.size()) + " 0 0\n";
      break;
  }
  for (const auto& p : pc.points()) point_line(p);
  return out;
}

void write_pointcloud(const std::string& path, const PointCloud& pc, std::optional<CloudFormat> format) {
  const CloudFormat f = format ? *format : format_from_path(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open '" + path + "' for writing");
  out << format_pointcloud(pc, f);
  if (!out) throw ArgumentError("failed writing '" + path + "'");
}

}  // namespace pointcpr
