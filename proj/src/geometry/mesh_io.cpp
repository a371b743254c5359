#include "prif/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace prif::geometry {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorKind::io, "read failed for '" + path + "'");
  return ss.str();
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& msg) {
  fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": " + msg);
}

double to_double(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    parse_fail(line_no, "expected a number, got '" + std::string(tok) + "'");
  }
  return v;
}

long long to_int(std::string_view tok, std::size_t line_no) {
  long long v = 0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    parse_fail(line_no, "expected an integer, got '" + std::string(tok) + "'");
  }
  return v;
}

/// Splits text into lines, keeping 1-based numbering.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    auto end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    line = text_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++line_no_;
    return true;
  }

  std::size_t line_no() const { return line_no_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

void add_polygon(TriangleMesh& mesh, const std::vector<std::uint32_t>& poly, LoadReport& report) {
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
    Triangle tri{poly[0], poly[k], poly[k + 1]};
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    if ((b - a).cross(c - a).norm() <= 0.0) {
      ++report.degenerate_dropped;
      continue;
    }
    mesh.triangles.push_back(tri);
  }
}

struct PlyProperty {
  std::string name;
  std::string type;
  bool is_list = false;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

}  // namespace

TriangleMesh parse_obj(std::string_view text, LoadReport* report) {
  TriangleMesh mesh;
  LoadReport local;
  LineReader reader(text);
  std::string_view line;
  struct PendingFace {
    std::vector<long long> idx;
    std::size_t line_no;
  };
  std::vector<PendingFace> faces;
  bool any_color = false;
  bool all_color = true;
  while (reader.next(line)) {
    const auto toks = split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks[0] == "v") {
      if (toks.size() != 4 && toks.size() != 7) {
        parse_fail(reader.line_no(), "vertex needs 3 coordinates (optionally 3 colors)");
      }
      mesh.vertices.emplace_back(to_double(toks[1], reader.line_no()), to_double(toks[2], reader.line_no()),
                                 to_double(toks[3], reader.line_no()));
      if (toks.size() == 7) {
        any_color = true;
        mesh.colors.emplace_back(to_double(toks[4], reader.line_no()), to_double(toks[5], reader.line_no()),
                                 to_double(toks[6], reader.line_no()));
      } else {
        all_color = false;
        mesh.colors.emplace_back(Vec3::Zero());
      }
    } else if (toks[0] == "f") {
      if (toks.size() < 4) parse_fail(reader.line_no(), "face needs at least 3 vertices");
      PendingFace face{{}, reader.line_no()};
      for (std::size_t i = 1; i < toks.size(); ++i) {
        const auto slash = toks[i].find('/');
        face.idx.push_back(to_int(toks[i].substr(0, slash), reader.line_no()));
      }
      faces.push_back(std::move(face));
    }
    // vt, vn, o, g, s, usemtl, mtllib: ignored
  }
  const auto nv = static_cast<long long>(mesh.vertices.size());
  for (const auto& face : faces) {
    std::vector<std::uint32_t> poly;
    for (long long i : face.idx) {
      // Negative OBJ indices count back from the last vertex.
      const long long resolved = i < 0 ? nv + i : i - 1;
      if (i == 0 || resolved < 0 || resolved >= nv) {
        parse_fail(face.line_no, "vertex index " + std::to_string(i) + " out of range");
      }
      poly.push_back(static_cast<std::uint32_t>(resolved));
    }
    add_polygon(mesh, poly, local);
  }
  if (!any_color || !all_color) mesh.colors.clear();
  if (report) *report = local;
  return mesh;
}

TriangleMesh parse_ply(std::string_view text, LoadReport* report) {
  LoadReport local;
  LineReader reader(text);
  std::string_view line;
  if (!reader.next(line) || split_ws(line) != std::vector<std::string_view>{"ply"}) {
    parse_fail(reader.line_no(), "missing 'ply' magic");
  }
  std::vector<PlyElement> elements;
  bool ascii = false;
  bool header_done = false;
  while (reader.next(line)) {
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks[0] == "format") {
      if (toks.size() < 2 || toks[1] != "ascii") parse_fail(reader.line_no(), "only ascii PLY is supported");
      ascii = true;
    } else if (toks[0] == "comment" || toks[0] == "obj_info") {
      continue;
    } else if (toks[0] == "element") {
      if (toks.size() != 3) parse_fail(reader.line_no(), "malformed element line");
      const auto count = to_int(toks[2], reader.line_no());
      if (count < 0) parse_fail(reader.line_no(), "negative element count");
      elements.push_back({std::string(toks[1]), static_cast<std::size_t>(count), {}});
    } else if (toks[0] == "property") {
      if (elements.empty()) parse_fail(reader.line_no(), "property before element");
      if (toks.size() == 5 && toks[1] == "list") {
        elements.back().properties.push_back({std::string(toks[4]), std::string(toks[3]), true});
      } else if (toks.size() == 3) {
        elements.back().properties.push_back({std::string(toks[2]), std::string(toks[1]), false});
      } else {
        parse_fail(reader.line_no(), "malformed property line");
      }
    } else if (toks[0] == "end_header") {
      header_done = true;
      break;
    } else {
      parse_fail(reader.line_no(), "unexpected header keyword '" + std::string(toks[0]) + "'");
    }
  }
  if (!header_done) parse_fail(reader.line_no(), "missing end_header");
  if (!ascii) parse_fail(reader.line_no(), "missing format line");

  TriangleMesh mesh;
  bool has_color = false;
  std::vector<std::vector<std::uint32_t>> polys;
  for (const auto& el : elements) {
    int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1, iface = -1;
    bool color_is_float = false;
    for (int k = 0; k < static_cast<int>(el.properties.size()); ++k) {
      const auto& p = el.properties[k];
      if (p.name == "x") ix = k;
      if (p.name == "y") iy = k;
      if (p.name == "z") iz = k;
      if (p.name == "red") ir = k, color_is_float = p.type == "float" || p.type == "double";
      if (p.name == "green") ig = k;
      if (p.name == "blue") ib = k;
      if (p.is_list && (p.name == "vertex_indices" || p.name == "vertex_index")) iface = k;
    }
    const bool is_vertex = el.name == "vertex";
    const bool is_face = el.name == "face";
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) parse_fail(reader.line_no(), "vertex element lacks x/y/z");
    if (is_vertex) has_color = ir >= 0 && ig >= 0 && ib >= 0;
    for (std::size_t row = 0; row < el.count; ++row) {
      if (!reader.next(line)) {
        parse_fail(reader.line_no() + 1, "unexpected end of file in element '" + el.name + "' (row " +
                                             std::to_string(row + 1) + " of " + std::to_string(el.count) + ")");
      }
      const auto toks = split_ws(line);
      std::vector<double> scalars(el.properties.size(), 0.0);
      std::vector<std::uint32_t> list;
      std::size_t t = 0;
      for (std::size_t k = 0; k < el.properties.size(); ++k) {
        if (t >= toks.size()) parse_fail(reader.line_no(), "too few values in '" + el.name + "' row");
        if (el.properties[k].is_list) {
          const auto n = to_int(toks[t++], reader.line_no());
          if (n < 0 || t + static_cast<std::size_t>(n) > toks.size()) {
            parse_fail(reader.line_no(), "list length exceeds row");
          }
          for (long long j = 0; j < n; ++j) {
            const auto idx = to_int(toks[t++], reader.line_no());
            if (idx < 0) parse_fail(reader.line_no(), "negative vertex index");
            if (static_cast<int>(k) == iface) list.push_back(static_cast<std::uint32_t>(idx));
          }
        } else {
          scalars[k] = to_double(toks[t++], reader.line_no());
        }
      }
      if (t != toks.size()) parse_fail(reader.line_no(), "too many values in '" + el.name + "' row");
      if (is_vertex) {
        mesh.vertices.emplace_back(scalars[ix], scalars[iy], scalars[iz]);
        if (has_color) {
          Vec3 c(scalars[ir], scalars[ig], scalars[ib]);
          mesh.colors.push_back(color_is_float ? c : Vec3(c / 255.0));
        }
      } else if (is_face) {
        if (iface < 0) parse_fail(reader.line_no(), "face element lacks vertex_indices");
        if (list.size() < 3) parse_fail(reader.line_no(), "face needs at least 3 vertices");
        for (auto idx : list) {
          if (idx >= mesh.vertices.size()) parse_fail(reader.line_no(), "vertex index out of range");
        }
        polys.push_back(std::move(list));
      }
    }
  }
  for (const auto& poly : polys) add_polygon(mesh, poly, local);
  if (report) *report = local;
  return mesh;
}

TriangleMesh load_mesh(const std::string& path, MeshFormat format, LoadReport* report) {
  const auto text = read_file(path);
  return format == MeshFormat::obj ? parse_obj(text, report) : parse_ply(text, report);
}

TriangleMesh load_mesh(const std::string& path, LoadReport* report) {
  auto ext = path.substr(path.find_last_of('.') == std::string::npos ? path.size() : path.find_last_of('.'));
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".obj") return load_mesh(path, MeshFormat::obj, report);
  if (ext == ".ply") return load_mesh(path, MeshFormat::ply, report);
  fail(ErrorKind::invalid_argument, "unknown mesh extension for '" + path + "'");
}

namespace {

int to_byte(double c) { return static_cast<int>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  out.precision(9);
  return out;
}

}  // namespace

void write_mesh_ply(const std::string& path, const TriangleMesh& mesh) {
  auto out = open_out(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << mesh.vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n";
  if (mesh.has_colors()) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "element face " << mesh.triangles.size() << "\nproperty list uchar int vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    out << v.x() << ' ' << v.y() << ' ' << v.z();
    if (mesh.has_colors()) {
      out << ' ' << to_byte(mesh.colors[i].x()) << ' ' << to_byte(mesh.colors[i].y()) << ' '
          << to_byte(mesh.colors[i].z());
    }
    out << '\n';
  }
  for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  if (!out) fail(ErrorKind::io, "write failed for '" + path + "'");
}

void write_point_cloud_ply(const std::string& path, std::span<const Vec3> points, std::span<const Vec3> colors) {
  if (!colors.empty() && colors.size() != points.size()) {
    fail(ErrorKind::invalid_argument, "color count does not match point count");
  }
  auto out = open_out(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << points.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n";
  if (!colors.empty()) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << points[i].x() << ' ' << points[i].y() << ' ' << points[i].z();
    if (!colors.empty()) {
      out << ' ' << to_byte(colors[i].x()) << ' ' << to_byte(colors[i].y()) << ' ' << to_byte(colors[i].z());
    }
    out << '\n';
  }
  if (!out) fail(ErrorKind::io, "write failed for '" + path + "'");
}

std::vector<Vec3> read_point_cloud_ply(const std::string& path, std::vector<Vec3>* colors) {
  auto mesh = parse_ply(read_file(path));
  if (colors) *colors = mesh.colors;
  return std::move(mesh.vertices);
}

}  // namespace prif::geometry
