#include "fracthm/errors.hpp"
#include "fracthm/mdgrid.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace fracthm {

namespace {

class LineReader {
 public:
  explicit LineReader(const std::string& text) : in_(text) {}

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream msg;
    msg << "line " << number_ << ": " << what;
    throw Error(ErrorKind::ParseError, msg.str());
  }

  std::string expect_line(const char* what) {
    std::string line;
    if (!next(line)) fail(std::string("unexpected end of file, expected ") + what);
    return line;
  }

 private:
  std::istringstream in_;
  int number_ = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace

Triangulation read_msh_triangulation(const std::string& text, const std::vector<int>& fracture_tags) {
  LineReader reader(text);
  Triangulation tri;
  std::unordered_map<long, int> node_index;
  std::vector<std::array<long, 3>> raw_triangles;
  struct RawLine {
    long a, b;
    int tag;
  };
  std::vector<RawLine> raw_lines;
  bool have_format = false, have_nodes = false, have_elements = false;

  std::string line;
  while (reader.next(line)) {
    const std::string section = trim(line);
    if (section == "$MeshFormat") {
      std::istringstream fmt(reader.expect_line("format line"));
      double version = 0;
      int file_type = -1;
      if (!(fmt >> version >> file_type)) reader.fail("malformed $MeshFormat");
      if (version < 2.0 || version >= 3.0) reader.fail("only MSH 2.x is supported");
      if (file_type != 0) reader.fail("only ASCII MSH files are supported");
      if (trim(reader.expect_line("$EndMeshFormat")) != "$EndMeshFormat")
        reader.fail("expected $EndMeshFormat");
      have_format = true;
    } else if (section == "$Nodes") {
      long count = 0;
      if (!(std::istringstream(reader.expect_line("node count")) >> count) || count < 0)
        reader.fail("malformed node count");
      for (long i = 0; i < count; ++i) {
        std::istringstream row(reader.expect_line("node"));
        long id;
        double x, y, z;
        if (!(row >> id >> x >> y >> z)) reader.fail("malformed node line");
        if (!node_index.emplace(id, static_cast<int>(tri.nodes.size())).second)
          reader.fail("duplicate node id");
        tri.nodes.emplace_back(x, y);
      }
      if (trim(reader.expect_line("$EndNodes")) != "$EndNodes") reader.fail("expected $EndNodes");
      have_nodes = true;
    } else if (section == "$Elements") {
      long count = 0;
      if (!(std::istringstream(reader.expect_line("element count")) >> count) || count < 0)
        reader.fail("malformed element count");
      for (long i = 0; i < count; ++i) {
        std::istringstream row(reader.expect_line("element"));
        long id;
        int type, ntags;
        if (!(row >> id >> type >> ntags) || ntags < 0) reader.fail("malformed element line");
        std::vector<long> tags(static_cast<std::size_t>(ntags));
        for (auto& t : tags)
          if (!(row >> t)) reader.fail("malformed element tags");
        const int physical = ntags > 0 ? static_cast<int>(tags[0]) : 0;
        if (type == 1) {
          long a, b;
          if (!(row >> a >> b)) reader.fail("malformed line element");
          raw_lines.push_back({a, b, physical});
        } else if (type == 2) {
          long a, b, c;
          if (!(row >> a >> b >> c)) reader.fail("malformed triangle element");
          raw_triangles.push_back({a, b, c});
        } else if (type == 15) {
          long a;
          if (!(row >> a)) reader.fail("malformed point element");
        } else {
          reader.fail("unsupported element type " + std::to_string(type));
        }
      }
      if (trim(reader.expect_line("$EndElements")) != "$EndElements")
        reader.fail("expected $EndElements");
      have_elements = true;
    } else if (!section.empty() && section[0] == '$') {
      // Skip unknown sections such as $PhysicalNames.
      const std::string end = "$End" + section.substr(1);
      std::string inner;
      bool closed = false;
      while (reader.next(inner))
        if (trim(inner) == end) {
          closed = true;
          break;
        }
      if (!closed) reader.fail("unterminated section " + section);
    } else {
      reader.fail("unexpected content outside of a section");
    }
  }
  if (!have_format || !have_nodes || !have_elements)
    throw Error(ErrorKind::ParseError, "missing $MeshFormat, $Nodes or $Elements section");
  if (raw_triangles.empty()) throw Error(ErrorKind::ParseError, "mesh contains no triangles");

  auto lookup = [&](long id) {
    auto it = node_index.find(id);
    if (it == node_index.end()) throw Error(ErrorKind::ParseError, "element references unknown node " + std::to_string(id));
    return it->second;
  };
  for (const auto& t : raw_triangles) tri.triangles.push_back({lookup(t[0]), lookup(t[1]), lookup(t[2])});
  for (const auto& l : raw_lines) {
    auto it = std::find(fracture_tags.begin(), fracture_tags.end(), l.tag);
    if (it == fracture_tags.end()) continue;
    tri.fracture_edges.push_back(
        {lookup(l.a), lookup(l.b), static_cast<int>(it - fracture_tags.begin())});
  }

  Point lo = tri.nodes.front(), hi = tri.nodes.front();
  for (const auto& p : tri.nodes) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  tri.domain = Box{lo, hi};
  return tri;
}

MixedDimGrid import_msh(const std::string& text, const std::vector<int>& fracture_tags) {
  return build_from_triangulation(read_msh_triangulation(text, fracture_tags));
}

}  // namespace fracthm
