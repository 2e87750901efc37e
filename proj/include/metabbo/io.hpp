#pragma once

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <zlib.h>

#include <json.hpp>

namespace metabbo {

using json = nlohmann::json;

inline json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw std::runtime_error("expected a JSON array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& item : j) v[i++] = item.get<double>();
  return v;
}

/// Row-major flattening, paired with explicit row/column counts in the schema.
inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows * cols)
    throw std::runtime_error("flattened matrix has the wrong number of entries");
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[i++].get<double>();
  return m;
}

/// Shortest round-trip decimal form of a double, reused for CSV cells so that
/// text output is deterministic and parses back to the identical value.
inline std::string format_double(double value) {
  return json(value).dump();
}

namespace detail {

inline std::string gzip_compress(const std::string& content) {
  z_stream strm{};
  if (deflateInit2(&strm, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK)
    throw std::runtime_error("gzip: deflate initialization failed");
  gz_header header{};
  header.time = 0;  // fixed so identical content yields identical bytes
  header.os = 3;
  deflateSetHeader(&strm, &header);

  std::string out;
  out.resize(deflateBound(&strm, static_cast<uLong>(content.size())));
  strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(content.data()));
  strm.avail_in = static_cast<uInt>(content.size());
  strm.next_out = reinterpret_cast<Bytef*>(out.data());
  strm.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&strm, Z_FINISH);
  deflateEnd(&strm);
  if (rc != Z_STREAM_END) throw std::runtime_error("gzip: compression failed");
  out.resize(out.size() - strm.avail_out);
  return out;
}

inline std::string gzip_decompress(const std::string& content) {
  z_stream strm{};
  if (inflateInit2(&strm, 15 + 32) != Z_OK)
    throw std::runtime_error("gzip: inflate initialization failed");
  std::string out;
  std::vector<char> buffer(1 << 16);
  strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(content.data()));
  strm.avail_in = static_cast<uInt>(content.size());
  int rc = Z_OK;
  do {
    strm.next_out = reinterpret_cast<Bytef*>(buffer.data());
    strm.avail_out = static_cast<uInt>(buffer.size());
    rc = inflate(&strm, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&strm);
      throw std::runtime_error("gzip: corrupt compressed stream");
    }
    out.append(buffer.data(), buffer.size() - strm.avail_out);
  } while (rc != Z_STREAM_END && strm.avail_in > 0);
  inflateEnd(&strm);
  if (rc != Z_STREAM_END) throw std::runtime_error("gzip: truncated compressed stream");
  return out;
}

}  // namespace detail

inline bool has_gz_suffix(const std::string& path) {
  return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

inline void write_file(const std::string& path, const std::string& content,
                       bool gzip = false) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  if (gzip || has_gz_suffix(path)) {
    const std::string packed = detail::gzip_compress(content);
    out.write(packed.data(), static_cast<std::streamsize>(packed.size()));
  } else {
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
  }
  if (!out) throw std::runtime_error("failed while writing '" + path + "'");
}

/// Reads a file, transparently inflating gzip content (detected by magic bytes).
inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::string content = buffer.str();
  if (content.size() >= 2 && static_cast<unsigned char>(content[0]) == 0x1f &&
      static_cast<unsigned char>(content[1]) == 0x8b)
    return detail::gzip_decompress(content);
  return content;
}

inline json load_json_file(const std::string& path) {
  const std::string content = read_file(path);
  json parsed = json::parse(content, nullptr, false);
  if (parsed.is_discarded())
    throw std::runtime_error("malformed JSON in '" + path + "'");
  return parsed;
}

inline void require_format(const json& j, const std::string& expected, const std::string& path) {
  if (!j.is_object() || !j.contains("format") || !j["format"].is_string() ||
      j["format"].get<std::string>() != expected)
    throw std::runtime_error("'" + path + "' is not a " + expected + " file");
}

}  // namespace metabbo
