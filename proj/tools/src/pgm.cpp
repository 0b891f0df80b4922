#include "pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "cinerecon/error.hpp"

namespace cinerecon::cli {

Gray16 montage(const std::vector<const RealImageSequence*>& panels, std::size_t frame, double white) {
  if (panels.empty()) throw StructuralError("montage needs at least one panel");
  const std::size_t h = panels[0]->rows(), w = panels[0]->cols();
  for (const auto* p : panels) {
    if (p->rows() != h || p->cols() != w || frame >= p->frames()) throw StructuralError("montage panels disagree in shape");
  }
  if (!(white > 0.0)) throw ParameterError("montage white level must be positive");
  Gray16 img;
  img.width = panels.size() * w + (panels.size() - 1) * kSeparatorPx;
  img.height = h;
  img.pixels.assign(img.width * img.height, 0);
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const std::size_t x0 = p * (w + kSeparatorPx);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double v = std::clamp((*panels[p])(frame, y, x) / white, 0.0, 1.0);
        img.pixels[y * img.width + x0 + x] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      }
    }
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const Gray16& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  std::vector<char> bytes(img.pixels.size() * 2);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    bytes[2 * i] = static_cast<char>(img.pixels[i] >> 8);
    bytes[2 * i + 1] = static_cast<char>(img.pixels[i] & 0xff);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Gray16 read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  std::size_t maxval = 0;
  Gray16 img;
  in >> magic >> img.width >> img.height >> maxval;
  if (!in || magic != "P5" || maxval != 65535) throw FormatError(path.string() + " is not a 16-bit binary PGM", 0);
  in.get();  // single whitespace before the raster
  const auto offset = static_cast<std::uint64_t>(in.tellg());
  std::vector<unsigned char> bytes(img.width * img.height * 2);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw FormatError(path.string() + ": truncated raster", offset + static_cast<std::uint64_t>(in.gcount()));
  }
  img.pixels.resize(img.width * img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
  }
  return img;
}

}  // namespace cinerecon::cli
