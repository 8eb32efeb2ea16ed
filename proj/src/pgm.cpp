#include "cogd/pgm.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "cogd/errors.hpp"
#include "cogd/run_record.hpp"

namespace cogd {

namespace {

// Reads the next header token, skipping whitespace and '#' comment lines.
std::string next_token(std::istream& in) {
  std::string token;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
    } else if (!std::isspace(c)) {
      token += static_cast<char>(c);
      while ((c = in.peek()) != EOF && !std::isspace(c) && c != '#')
        token += static_cast<char>(in.get());
      return token;
    }
  }
  return token;
}

long parse_header_int(std::istream& in, const std::filesystem::path& path) {
  const std::string token = next_token(in);
  if (token.empty())
    throw IoError("truncated PGM header in " + path.string());
  try {
    return std::stol(token);
  } catch (const std::exception&) {
    throw IoError("bad PGM header value '" + token + "' in " + path.string());
  }
}

}  // namespace

Eigen::ArrayXXd load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  const std::string magic = next_token(in);
  if (magic != "P5" && magic != "P2")
    throw IoError("unsupported PGM magic '" + magic + "' in " + path.string() +
                  " (expected P5 or P2)");
  const long cols = parse_header_int(in, path);
  const long rows = parse_header_int(in, path);
  const long maxval = parse_header_int(in, path);
  if (cols < 1 || rows < 1)
    throw IoError("bad PGM dimensions in " + path.string());
  if (maxval == 0) throw IoError("PGM maxval is zero in " + path.string());
  if (maxval < 0 || maxval > 65535)
    throw IoError("PGM maxval out of range in " + path.string());

  Eigen::ArrayXXd image(rows, cols);
  const double scale = 1.0 / static_cast<double>(maxval);
  if (magic == "P2") {
    for (long r = 0; r < rows; ++r) {
      for (long c = 0; c < cols; ++c) {
        const long v = parse_header_int(in, path);
        if (v < 0 || v > maxval)
          throw IoError("PGM sample out of range in " + path.string());
        image(r, c) = static_cast<double>(v) * scale;
      }
    }
  } else {
    // P5: one whitespace byte after maxval, then the raster.
    in.get();
    const bool wide = maxval > 255;
    const std::size_t need = static_cast<std::size_t>(rows) * cols * (wide ? 2 : 1);
    std::string payload(need, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(need));
    if (static_cast<std::size_t>(in.gcount()) != need)
      throw IoError("truncated PGM payload in " + path.string());
    std::size_t at = 0;
    for (long r = 0; r < rows; ++r) {
      for (long c = 0; c < cols; ++c) {
        long v;
        if (wide) {
          v = (static_cast<unsigned char>(payload[at]) << 8) |
              static_cast<unsigned char>(payload[at + 1]);
          at += 2;
        } else {
          v = static_cast<unsigned char>(payload[at]);
          at += 1;
        }
        image(r, c) = static_cast<double>(v) * scale;
      }
    }
  }
  return image;
}

void save_pgm(const Eigen::ArrayXXd& image, const std::filesystem::path& path,
              int max_value) {
  if (image.size() == 0) throw InvalidInput("save_pgm: empty image");
  if (max_value < 1 || max_value > 65535)
    throw InvalidInput("save_pgm: max_value must be in [1, 65535]");

  std::ostringstream out;
  out << "P5\n" << image.cols() << ' ' << image.rows() << '\n' << max_value
      << '\n';
  const bool wide = max_value > 255;
  for (Eigen::Index r = 0; r < image.rows(); ++r) {
    for (Eigen::Index c = 0; c < image.cols(); ++c) {
      const double clamped = std::min(1.0, std::max(0.0, image(r, c)));
      const long v = std::lround(clamped * max_value);
      if (wide) {
        out.put(static_cast<char>((v >> 8) & 0xff));
        out.put(static_cast<char>(v & 0xff));
      } else {
        out.put(static_cast<char>(v & 0xff));
      }
    }
  }
  write_file_atomic(path, out.str());
}

}  // namespace cogd
