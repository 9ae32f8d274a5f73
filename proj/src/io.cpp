#include "condind/io.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace cind {

namespace {

[[noreturn]] void parse_fail(const std::string& what) { throw Error(Errc::ParseError, what); }

Matrix parse_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        parse_fail("bad CSV number '" + cell + "'");
      }
      if (cell.find_first_not_of(" \t", used) != std::string::npos) parse_fail("bad CSV number '" + cell + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) parse_fail("ragged CSV rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) parse_fail("empty CSV");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

}  // namespace

json matrix_to_json(const Matrix& m) {
  json p = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    p.push_back(std::move(row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"p", std::move(p)}};
}

Matrix matrix_from_json(const json& j) {
  try {
    const json& p = j.at("p");
    if (!p.is_array() || p.empty()) parse_fail("\"p\" must be a non-empty array");
    const std::size_t rows = p.size(), cols = p.at(0).size();
    if (j.contains("rows") && j.at("rows").get<std::size_t>() != rows) parse_fail("\"rows\" does not match \"p\"");
    if (j.contains("cols") && j.at("cols").get<std::size_t>() != cols) parse_fail("\"cols\" does not match \"p\"");
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
      if (!p[i].is_array() || p[i].size() != cols) parse_fail("ragged rows in \"p\"");
      for (std::size_t k = 0; k < cols; ++k) m(i, k) = p[i][k].get<double>();
    }
    return m;
  } catch (const json::exception& e) {
    parse_fail(e.what());
  }
}

Matrix parse_matrix(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) parse_fail("empty input");
  if (text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      parse_fail(e.what());
    }
    return matrix_from_json(j);
  }
  return parse_csv(text);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) parse_fail("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Matrix read_matrix_file(const std::string& path) { return parse_matrix(read_text_file(path)); }

namespace {

json step_to_json(const QuadJoint& q) {
  json j{{"dims", q.dims}};
  if (q.factored()) {
    json fs = json::array();
    for (const QuadJoint& f : q.factors) fs.push_back(step_to_json(f));
    j["factors"] = std::move(fs);
  } else {
    j["t"] = q.t;
  }
  return j;
}

QuadJoint step_from_json(const json& j) {
  const auto dims = j.at("dims").get<std::array<int, 4>>();
  if (j.contains("factors")) {
    std::vector<QuadJoint> fs;
    for (const json& f : j.at("factors")) fs.push_back(step_from_json(f));
    QuadJoint q = QuadJoint::product(fs);
    if (q.dims != dims) parse_fail("factor dims do not multiply to the step dims");
    return q;
  }
  return QuadJoint::dense(dims, j.at("t").get<std::vector<double>>());
}

}  // namespace

json witness_to_json(const DerivationWitness& w) {
  json steps = json::array();
  for (const QuadJoint& q : w.steps) steps.push_back(step_to_json(q));
  return json{{"base", matrix_to_json(w.base)}, {"tol", w.tol}, {"steps", std::move(steps)}};
}

DerivationWitness witness_from_json(const json& j) {
  try {
    DerivationWitness w;
    w.base = matrix_from_json(j.at("base"));
    if (j.contains("tol")) w.tol = j.at("tol").get<double>();
    for (const json& s : j.at("steps")) w.steps.push_back(step_from_json(s));
    return w;
  } catch (const json::exception& e) {
    parse_fail(e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::ParseError) throw;
    parse_fail(e.what());
  }
}

DerivationWitness read_witness_file(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    parse_fail(e.what());
  }
  return witness_from_json(j);
}

}  // namespace cind
