#include <fstream>
#include <sstream>

#include "cinerecon/cxt.hpp"
#include "cinerecon/error.hpp"
#include "cinerecon/params.hpp"

namespace cinerecon::ad {

namespace {

constexpr const char* kHeaderTag = "# cinerecon parameter header v1";

std::string shape_token(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.rank; ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

Shape parse_shape(const std::string& token, std::uint64_t line_offset) {
  std::vector<std::size_t> dims;
  std::stringstream ss(token);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      dims.push_back(std::stoull(part));
    } catch (const std::exception&) {
      throw FormatError("bad shape token '" + token + "'", line_offset);
    }
  }
  Shape s;
  if (dims.empty() || dims.size() > 4) throw FormatError("shape rank must be 1..4 in '" + token + "'", line_offset);
  s.rank = dims.size();
  std::copy(dims.begin(), dims.end(), s.dims.begin());
  return s;
}

}  // namespace

std::filesystem::path payload_path(const std::filesystem::path& stem) {
  auto p = stem;
  p += ".cxt";
  return p;
}

std::filesystem::path header_path(const std::filesystem::path& stem) {
  auto p = stem;
  p += ".hdr";
  return p;
}

void write_params(const std::filesystem::path& stem, const ParamSet& params,
                  const std::vector<std::pair<std::string, std::string>>& extra) {
  std::vector<double> flat;
  flat.reserve(params.total_count());
  std::ofstream hdr(header_path(stem), std::ios::trunc);
  if (!hdr) throw IoError("cannot open " + header_path(stem).string() + " for writing");
  hdr << kHeaderTag << '\n';
  for (const auto& [k, v] : extra) hdr << k << '=' << v << '\n';
  hdr << "payload=" << payload_path(stem).filename().string() << '\n';
  hdr << "count=" << params.total_count() << '\n';
  for (const auto& t : params.tensors()) {
    hdr << "param " << t.name << ' ' << shape_token(t.shape) << ' ' << flat.size() << ' ' << t.values.size() << '\n';
    flat.insert(flat.end(), t.values.begin(), t.values.end());
  }
  if (!hdr) throw IoError("write to " + header_path(stem).string() + " failed");
  write_tensor(payload_path(stem), make_real64({flat.size()}, flat));
}

ParamFile read_params(const std::filesystem::path& stem) {
  std::ifstream hdr(header_path(stem));
  if (!hdr) throw IoError("cannot open " + header_path(stem).string());
  const CxtTensor payload = read_tensor(payload_path(stem));
  if (payload.dims.size() != 1) throw FormatError("parameter payload must be a rank-1 tensor", 5);
  const std::vector<double> flat = real_values(payload);

  ParamFile out;
  std::string line;
  std::uint64_t offset = 0;
  bool first = true;
  while (std::getline(hdr, line)) {
    const std::uint64_t line_offset = offset;
    offset += line.size() + 1;
    if (first) {
      if (line != kHeaderTag) throw FormatError("missing parameter header tag", 0);
      first = false;
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("param ", 0) == 0) {
      std::istringstream ls(line.substr(6));
      std::string name, shape;
      std::size_t off = 0, count = 0;
      if (!(ls >> name >> shape >> off >> count)) throw FormatError("malformed param line", line_offset);
      const Shape s = parse_shape(shape, line_offset);
      if (s.numel() != count) throw FormatError("param " + name + " count does not match its shape", line_offset);
      if (off + count > flat.size()) {
        throw FormatError("param " + name + " extends past the payload (" + std::to_string(flat.size()) + " values)",
                          line_offset);
      }
      out.params.add(name, s, std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(off),
                                                  flat.begin() + static_cast<std::ptrdiff_t>(off + count)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("expected key=value or param line", line_offset);
    out.header[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (first) throw FormatError("empty parameter header", 0);
  if (out.params.total_count() != flat.size()) {
    throw FormatError("parameter table covers " + std::to_string(out.params.total_count()) + " of " +
                          std::to_string(flat.size()) + " payload values",
                      offset);
  }
  return out;
}

}  // namespace cinerecon::ad
