#include "transpose/geometry_io.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "transpose/errors.hpp"
#include "transpose/util/atomic_file.hpp"

namespace transpose::geom {

namespace {

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, std::size_t line) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) throw ParseError("not a number: '" + tok + "'", line);
  return value;
}

std::size_t parse_count(const std::string& tok, std::size_t line) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) throw ParseError("not a count: '" + tok + "'", line);
  return value;
}

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<std::string> properties;
  bool has_list = false;
};

}  // namespace

PlyCloud read_ply(std::istream& in) {
  std::string text;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, text)) return false;
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    return true;
  };

  if (!next_line() || text != "ply") throw ParseError("missing 'ply' magic", line_no == 0 ? 1 : line_no);
  std::vector<Element> elements;
  bool format_seen = false;
  for (;;) {
    if (!next_line()) throw ParseError("unexpected end of header", line_no + 1);
    const auto tok = tokens(text);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3 || tok[1] != "ascii") throw ParseError("only 'format ascii 1.0' is supported", line_no);
      format_seen = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError("malformed element declaration", line_no);
      elements.push_back({tok[1], parse_count(tok[2], line_no), {}, false});
    } else if (tok[0] == "property") {
      if (elements.empty()) throw ParseError("property before any element", line_no);
      if (tok.size() >= 2 && tok[1] == "list") {
        if (tok.size() != 5) throw ParseError("malformed list property", line_no);
        elements.back().has_list = true;
        elements.back().properties.push_back(tok[4]);
      } else {
        if (tok.size() != 3) throw ParseError("malformed property", line_no);
        elements.back().properties.push_back(tok[2]);
      }
    } else {
      throw ParseError("unknown header keyword '" + tok[0] + "'", line_no);
    }
  }
  if (!format_seen) throw ParseError("missing format line", line_no);

  PlyCloud result;
  bool vertex_seen = false;
  for (const Element& el : elements) {
    if (el.name != "vertex") {
      for (std::size_t i = 0; i < el.count; ++i) {
        if (!next_line()) throw ParseError("unexpected end of '" + el.name + "' data", line_no + 1);
      }
      continue;
    }
    if (el.has_list) throw ParseError("list properties on vertex are not supported", line_no);
    vertex_seen = true;
    auto column = [&el](const std::string& name) -> std::ptrdiff_t {
      for (std::size_t i = 0; i < el.properties.size(); ++i) {
        if (el.properties[i] == name) return static_cast<std::ptrdiff_t>(i);
      }
      return -1;
    };
    const std::ptrdiff_t cx = column("x"), cy = column("y"), cz = column("z");
    const std::ptrdiff_t nx = column("nx"), ny = column("ny"), nz = column("nz");
    if (cx < 0 || cy < 0 || cz < 0) throw ParseError("vertex element lacks x, y or z", line_no);
    const bool with_normals = nx >= 0 && ny >= 0 && nz >= 0;
    if (!with_normals && (nx >= 0 || ny >= 0 || nz >= 0)) {
      throw ParseError("vertex element has an incomplete normal", line_no);
    }
    result.cloud.points.reserve(el.count);
    if (with_normals) result.normals.emplace().normals.reserve(el.count);
    for (std::size_t i = 0; i < el.count; ++i) {
      if (!next_line()) throw ParseError("expected " + std::to_string(el.count) + " vertices", line_no + 1);
      const auto tok = tokens(text);
      if (tok.size() != el.properties.size()) {
        throw ParseError("expected " + std::to_string(el.properties.size()) + " values, found " +
                             std::to_string(tok.size()),
                         line_no);
      }
      auto at = [&](std::ptrdiff_t c) { return parse_double(tok[static_cast<std::size_t>(c)], line_no); };
      result.cloud.points.emplace_back(at(cx), at(cy), at(cz));
      if (with_normals) result.normals->normals.emplace_back(at(nx), at(ny), at(nz));
    }
  }
  if (!vertex_seen) throw ParseError("no vertex element", line_no);
  return result;
}

PlyCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_ply(in);
}

void write_ply(std::ostream& out, const PointCloud& cloud, const NormalField* normals) {
  if (normals != nullptr && normals->size() != cloud.size()) {
    throw DimensionError("write_ply: normal count differs from point count");
  }
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (normals != nullptr) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "end_header\n";
  out.precision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (normals != nullptr) {
      const Vec3& n = (*normals)[i];
      out << ' ' << n.x() << ' ' << n.y() << ' ' << n.z();
    }
    out << '\n';
  }
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud, const NormalField* normals) {
  util::write_atomically(path, [&](std::ostream& out) { write_ply(out, cloud, normals); });
}

DepthImage read_depth_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  // Header tokens may be separated by arbitrary whitespace and '#' comments.
  auto next_token = [&]() {
    std::string tok;
    char c = 0;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        tok.push_back(c);
        break;
      }
    }
    while (in.get(c) && !std::isspace(static_cast<unsigned char>(c))) tok.push_back(c);
    return tok;
  };
  const std::string magic = next_token();
  if (magic != "P5") throw DataError(path.string() + ": not a binary PGM");
  DepthImage img;
  try {
    img.width = std::stoul(next_token());
    img.height = std::stoul(next_token());
    if (std::stoul(next_token()) != 65535) throw DataError(path.string() + ": depth PGM must have maxval 65535");
  } catch (const std::logic_error&) {
    throw DataError(path.string() + ": malformed PGM header");
  }
  const std::size_t n = img.width * img.height;
  std::vector<unsigned char> bytes(2 * n);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw DataError(path.string() + ": truncated PGM data");
  img.depth.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    img.depth[i] = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
  }
  return img;
}

void write_depth_pgm(const std::filesystem::path& path, const DepthImage& image) {
  if (image.depth.size() != image.width * image.height) throw DimensionError("write_depth_pgm: size mismatch");
  util::write_atomically(path, [&](std::ostream& out) {
    out << "P5\n" << image.width << ' ' << image.height << "\n65535\n";
    for (std::uint16_t d : image.depth) {
      const char le[2] = {static_cast<char>(d & 0xff), static_cast<char>(d >> 8)};
      out.write(le, 2);
    }
  });
}

}  // namespace transpose::geom
