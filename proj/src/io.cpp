#include "gpe/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gpe {

namespace {

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return in;
}

double parse_double(std::string_view text, const std::string& where) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::runtime_error("malformed number '" + std::string(text) + "' in " + where);
  return value;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>(v >> (8 * b));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw std::runtime_error("truncated binary cloud");
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
  return v;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("cannot format double");
  return std::string(buf, ptr);
}

void write_matrix_csv(const std::filesystem::path& path, const RowMatrix& values) {
  std::ofstream out = open_out(path);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j) out << ',';
      out << format_double(values(i, j));
    }
    out << '\n';
  }
}

RowMatrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view field(line.data() + start,
                                   (comma == std::string::npos ? line.size() : comma) - start);
      row.push_back(parse_double(field, path.string()));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged CSV rows in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty CSV: " + path.string());
  RowMatrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_cloud_csv(const std::filesystem::path& path, const PointCloud& cloud) {
  write_matrix_csv(path, cloud.points());
}

PointCloud read_cloud_csv(const std::filesystem::path& path) { return PointCloud(read_matrix_csv(path)); }

void write_cloud_binary(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out = open_out(path, std::ios::out | std::ios::binary);
  put_u64(out, static_cast<std::uint64_t>(cloud.size()));
  put_u64(out, static_cast<std::uint64_t>(cloud.dim()));
  const RowMatrix& p = cloud.points();
  for (Eigen::Index i = 0; i < p.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(p.data()[i]));
}

PointCloud read_cloud_binary(const std::filesystem::path& path) {
  std::ifstream in = open_in(path, std::ios::in | std::ios::binary);
  const std::uint64_t n = get_u64(in);
  const std::uint64_t d = get_u64(in);
  if (n == 0 || d == 0 || n > (1u << 24) || d > (1u << 24) || n * d > (1ull << 28))
    throw std::runtime_error("implausible binary cloud header in " + path.string());
  RowMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<double>(get_u64(in));
  return PointCloud(std::move(m));
}

PointCloud read_cloud(const std::filesystem::path& path) {
  return path.extension() == ".bin" ? read_cloud_binary(path) : read_cloud_csv(path);
}

void write_trace_csv(const std::filesystem::path& path, const TrainTrace& trace) {
  std::ofstream out = open_out(path);
  out << "iteration,cost,grad_norm_sq,step\n";
  for (const TraceRecord& r : trace.records)
    out << r.iteration << ',' << format_double(r.cost) << ',' << format_double(r.grad_norm_sq) << ','
        << format_double(r.step) << '\n';
}

nlohmann::json mlp_to_json(const MlpMap& map) {
  nlohmann::json doc;
  doc["schema"] = kSchemaVersion;
  doc["kind"] = "mlp";
  doc["widths"] = map.widths();
  doc["slope"] = map.slope();
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (std::size_t l = 0; l < map.layer_count(); ++l) {
    const Eigen::MatrixXd& w = map.weights()[l];
    std::vector<double> flat;
    flat.reserve(w.size());
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    weights.push_back(flat);
    const Vector& b = map.biases()[l];
    biases.push_back(std::vector<double>(b.data(), b.data() + b.size()));
  }
  doc["weights"] = weights;
  doc["biases"] = biases;
  return doc;
}

MlpMap mlp_from_json(const nlohmann::json& doc) {
  const auto widths = doc.at("widths").get<std::vector<int>>();
  const double slope = doc.at("slope").get<double>();
  const auto& jw = doc.at("weights");
  const auto& jb = doc.at("biases");
  if (widths.size() < 2 || jw.size() + 1 != widths.size() || jb.size() + 1 != widths.size())
    throw std::runtime_error("mlp json: layer count does not match widths");
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Vector> biases;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto flat = jw[l].get<std::vector<double>>();
    const auto b = jb[l].get<std::vector<double>>();
    const int out = widths[l + 1], in = widths[l];
    if (flat.size() != static_cast<std::size_t>(out) * in || b.size() != static_cast<std::size_t>(out))
      throw std::runtime_error("mlp json: layer shape mismatch");
    Eigen::MatrixXd w(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) w(r, c) = flat[static_cast<std::size_t>(r) * in + c];
    weights.push_back(std::move(w));
    biases.push_back(Eigen::Map<const Vector>(b.data(), out));
  }
  return MlpMap(widths, slope, std::move(weights), std::move(biases));
}

void write_mlp_json(const std::filesystem::path& path, const MlpMap& map) { write_json(path, mlp_to_json(map)); }

MlpMap read_mlp_json(const std::filesystem::path& path) { return mlp_from_json(read_json(path)); }

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("invalid JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace gpe
