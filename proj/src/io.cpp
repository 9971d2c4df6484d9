#include "ddfl/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ddfl {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& cell) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    throw IoError("cannot parse numeric cell '" + cell + "'");
  }
  while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
  if (pos != cell.size()) throw IoError("trailing characters in numeric cell '" + cell + "'");
  return v;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

struct CsvTable {
  int m = 0;
  std::vector<std::vector<std::string>> rows;  // each row: 1 + 2m cells, possibly empty
};

CsvTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw IoError("'" + path + "': empty file");
  const std::vector<std::string> header = split_csv_line(trim(line));
  if (header.empty() || trim(header[0]) != "k") throw IoError("'" + path + "': first column must be k");
  int mu = 0, my = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string h = trim(header[c]);
    if (h.rfind("u_", 0) == 0)
      ++mu;
    else if (h.rfind("y_", 0) == 0)
      ++my;
    else
      throw IoError("'" + path + "': unexpected column '" + h + "'");
  }
  if (mu != my || mu < 1) throw IoError("'" + path + "': need matching u_1..u_m and y_1..y_m columns");

  CsvTable table;
  table.m = mu;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    auto cells = split_csv_line(t);
    cells.resize(1 + 2 * static_cast<std::size_t>(mu));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  traj.validate();
  const auto& s = traj.structure;
  const int N = traj.length();
  const int rows = N + s.max_degree();

  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "k";
  for (int j = 1; j <= s.m; ++j) out << ",u_" << j;
  for (int j = 1; j <= s.m; ++j) out << ",y_" << j;
  out << "\n";
  for (int k = 0; k < rows; ++k) {
    out << k;
    for (int j = 0; j < s.m; ++j) {
      out << ",";
      if (k < N) out << format_double(traj.inputs(j, k));
    }
    for (int j = 0; j < s.m; ++j) {
      out << ",";
      if (k < N + s.d[static_cast<std::size_t>(j)]) out << format_double(traj.outputs[static_cast<std::size_t>(j)](k));
    }
    out << "\n";
  }
  if (!out) throw IoError("write failure on '" + path + "'");
}

Trajectory read_trajectory_csv(const std::string& path) {
  const CsvTable table = read_table(path);
  const int m = table.m;
  const int rows = static_cast<int>(table.rows.size());
  if (rows < 2) throw IoError("'" + path + "': need at least two data rows");

  // N = filled input prefix; d_i = filled output count - N
  int N = 0;
  while (N < rows && !trim(table.rows[static_cast<std::size_t>(N)][1]).empty()) ++N;
  if (N < 1) throw IoError("'" + path + "': no input samples");

  Trajectory traj;
  traj.structure.m = m;
  traj.structure.d.resize(static_cast<std::size_t>(m));
  traj.inputs.resize(m, N);
  traj.outputs.resize(static_cast<std::size_t>(m));

  for (int k = 0; k < N; ++k)
    for (int j = 0; j < m; ++j) {
      const std::string cell = trim(table.rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(1 + j)]);
      if (cell.empty()) throw IoError("'" + path + "': missing input cell at row " + std::to_string(k));
      traj.inputs(j, k) = parse_double(cell);
    }
  for (int k = N; k < rows; ++k)
    for (int j = 0; j < m; ++j)
      if (!trim(table.rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(1 + j)]).empty())
        throw IoError("'" + path + "': input cell past the horizon at row " + std::to_string(k));

  for (int j = 0; j < m; ++j) {
    std::vector<double> column;
    for (int k = 0; k < rows; ++k) {
      const std::string cell = trim(table.rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(1 + m + j)]);
      if (cell.empty()) break;
      column.push_back(parse_double(cell));
    }
    const int count = static_cast<int>(column.size());
    if (count <= N)
      throw IoError("'" + path + "': output channel " + std::to_string(j + 1) + " must extend past the input horizon");
    traj.structure.d[static_cast<std::size_t>(j)] = count - N;
    traj.outputs[static_cast<std::size_t>(j)] = Eigen::Map<const Eigen::VectorXd>(column.data(), count);
  }
  traj.structure.n = 0;
  for (int di : traj.structure.d) traj.structure.n += di;
  traj.validate();
  return traj;
}

void write_input_csv(const Eigen::MatrixXd& inputs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "k";
  for (int j = 1; j <= inputs.rows(); ++j) out << ",u_" << j;
  out << "\n";
  for (int k = 0; k < inputs.cols(); ++k) {
    out << k;
    for (int j = 0; j < inputs.rows(); ++j) out << "," << format_double(inputs(j, k));
    out << "\n";
  }
}

Eigen::MatrixXd read_input_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw IoError("'" + path + "': empty file");
  const auto header = split_csv_line(trim(line));
  if (header.empty() || trim(header[0]) != "k") throw IoError("'" + path + "': first column must be k");
  const int m = static_cast<int>(header.size()) - 1;
  if (m < 1) throw IoError("'" + path + "': no input columns");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto cells = split_csv_line(t);
    if (static_cast<int>(cells.size()) < 1 + m) throw IoError("'" + path + "': short row");
    std::vector<double> row;
    for (int j = 0; j < m; ++j) row.push_back(parse_double(trim(cells[static_cast<std::size_t>(1 + j)])));
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd inputs(m, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (int j = 0; j < m; ++j) inputs(j, static_cast<Eigen::Index>(k)) = rows[k][static_cast<std::size_t>(j)];
  return inputs;
}

std::vector<Eigen::VectorXd> read_reference_csv(const std::string& path, const SystemStructure& structure) {
  structure.validate();
  const CsvTable table = read_table(path);
  if (table.m != structure.m) throw IoError("'" + path + "': reference has " + std::to_string(table.m) +
                                            " channels, expected " + std::to_string(structure.m));
  const int rows = static_cast<int>(table.rows.size());
  std::vector<Eigen::VectorXd> ybar(static_cast<std::size_t>(structure.m));
  int L = -1;
  for (int j = 0; j < structure.m; ++j) {
    std::vector<double> column;
    for (int k = 0; k < rows; ++k) {
      const std::string cell =
          trim(table.rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(1 + structure.m + j)]);
      if (cell.empty()) break;
      column.push_back(parse_double(cell));
    }
    const int horizon = static_cast<int>(column.size()) - structure.d[static_cast<std::size_t>(j)];
    if (horizon < 1)
      throw IoError("'" + path + "': reference channel " + std::to_string(j + 1) + " shorter than d_i+1 samples");
    if (L < 0) L = horizon;
    if (horizon != L) throw IoError("'" + path + "': reference channels imply inconsistent horizons");
    ybar[static_cast<std::size_t>(j)] = Eigen::Map<const Eigen::VectorXd>(column.data(), column.size());
  }
  return ybar;
}

void write_channel_csv(const std::string& path, const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_hat,
                       const Eigen::VectorXd& abs_error, const Eigen::VectorXd& bound, int lead) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "k,y_true,y_hat,abs_error,bound\n";
  for (int k = 0; k < y_true.size(); ++k) {
    out << k << "," << format_double(y_true(k)) << "," << format_double(y_hat(k)) << ","
        << format_double(abs_error(k)) << ",";
    // the bound applies from step d_i on; earlier entries are exactly zero
    if (k < lead)
      out << format_double(0.0);
    else if (k - lead < bound.size())
      out << format_double(bound(k - lead));
    out << "\n";
  }
}

std::string file_hash_hex(const std::string& path) {
  const std::string bytes = read_text_file(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IoError("write failure on '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ddfl
