#include "cpkl/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace cpkl {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

bool next_data_line(std::istream& in, std::string& line, long& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    return true;
  }
  return false;
}

std::vector<long long> parse_integers(const std::string& line, long line_no) {
  std::istringstream ss(line);
  std::vector<long long> values;
  std::string tok;
  while (ss >> tok) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size())
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": '" + tok + "' is not an integer");
    values.push_back(v);
  }
  return values;
}

}  // namespace

SparseCountTensor read_coo(std::istream& in) {
  std::string line;
  long line_no = 0;
  if (!next_data_line(in, line, line_no)) throw Error(ErrorCode::ParseError, "missing header line");
  const auto header = parse_integers(line, line_no);
  if (header.empty() || header[0] < 2 || static_cast<long long>(header.size()) != header[0] + 1)
    throw Error(ErrorCode::ParseError, "header must be 'N I_1 ... I_N' with N >= 2");
  const auto N = static_cast<std::size_t>(header[0]);
  Shape shape(std::vector<Index>(header.begin() + 1, header.end()));

  std::vector<CountEntry> entries;
  while (next_data_line(in, line, line_no)) {
    const auto v = parse_integers(line, line_no);
    if (v.size() != N + 1)
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " + std::to_string(N + 1) + " fields");
    CountEntry e;
    for (std::size_t k = 0; k < N; ++k) e.index.push_back(static_cast<Index>(v[k] - 1));
    e.count = v[N];
    entries.push_back(std::move(e));
  }
  return SparseCountTensor::validate(std::move(shape), std::move(entries));
}

SparseCountTensor read_coo(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_coo(in);
}

void write_coo(std::ostream& out, const SparseCountTensor& tensor) {
  out << tensor.ndims();
  for (Index d : tensor.shape().dims()) out << ' ' << d;
  out << '\n';
  for (Index e = 0; e < tensor.nnz(); ++e) {
    for (Index i : tensor.index(e)) out << i + 1 << ' ';
    out << tensor.count(e) << '\n';
  }
}

void write_coo(const std::filesystem::path& path, const SparseCountTensor& tensor) {
  auto out = open_out(path);
  write_coo(out, tensor);
}

nlohmann::json model_to_json(const KruskalModel& model) {
  nlohmann::json j;
  j["dims"] = model.shape().dims();
  j["R"] = model.rank();
  j["lambda"] = std::vector<double>(model.lambda.data(), model.lambda.data() + model.lambda.size());
  auto factors = nlohmann::json::array();
  for (const auto& a : model.factors) {
    auto rows = nlohmann::json::array();
    for (Index i = 0; i < a.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(a.cols()));
      for (Index r = 0; r < a.cols(); ++r) row[static_cast<std::size_t>(r)] = a(i, r);
      rows.push_back(std::move(row));
    }
    factors.push_back(std::move(rows));
  }
  j["factors"] = std::move(factors);
  return j;
}

KruskalModel model_from_json(const nlohmann::json& j) {
  try {
    const auto dims = j.at("dims").get<std::vector<Index>>();
    const auto R = j.at("R").get<Index>();
    const auto lambda = j.at("lambda").get<std::vector<double>>();
    const auto& factors = j.at("factors");
    KruskalModel model(Shape(dims), R);
    if (static_cast<Index>(lambda.size()) != R) throw Error(ErrorCode::ParseError, "lambda length differs from R");
    if (factors.size() != dims.size()) throw Error(ErrorCode::ParseError, "factor count differs from dims");
    model.lambda = Eigen::Map<const Vector>(lambda.data(), R);
    for (std::size_t n = 0; n < dims.size(); ++n) {
      auto& a = model.factors[n];
      const auto& f = factors[n];
      const bool flat = !f.empty() && f.front().is_number();
      if (flat) {
        const auto v = f.get<std::vector<double>>();
        if (static_cast<Index>(v.size()) != a.size()) throw Error(ErrorCode::ParseError, "factor size mismatch");
        a = Eigen::Map<const FactorMatrix>(v.data(), a.rows(), a.cols());
      } else {
        if (static_cast<Index>(f.size()) != a.rows()) throw Error(ErrorCode::ParseError, "factor row count mismatch");
        for (Index i = 0; i < a.rows(); ++i) {
          const auto row = f[static_cast<std::size_t>(i)].get<std::vector<double>>();
          if (static_cast<Index>(row.size()) != R) throw Error(ErrorCode::ParseError, "factor row length differs from R");
          for (Index r = 0; r < R; ++r) a(i, r) = row[static_cast<std::size_t>(r)];
        }
      }
    }
    if ((model.lambda.array() < 0.0).any()) throw Error(ErrorCode::ParseError, "negative lambda entry");
    for (const auto& a : model.factors)
      if ((a.array() < 0.0).any()) throw Error(ErrorCode::ParseError, "negative factor entry");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model json: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const KruskalModel& model) {
  auto out = open_out(path);
  out << model_to_json(model).dump(1) << '\n';
}

KruskalModel load_model(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void write_trace_csv(std::ostream& out, const FitTrace& trace) {
  out << "outer,mode_kkt_max,objective,exact_zeros,seconds,ls_failures,fallbacks\n";
  const auto old = out.precision(17);
  for (const auto& row : trace.rows)
    out << row.outer << ',' << row.kkt_max << ',' << row.objective << ',' << row.exact_zeros << ',' << row.seconds << ','
        << row.ls_failures << ',' << row.fallbacks << '\n';
  out.precision(old);
}

void write_trace_csv(const std::filesystem::path& path, const FitTrace& trace) {
  auto out = open_out(path);
  write_trace_csv(out, trace);
}

}  // namespace cpkl
