#include "edd/model_io.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace edd {

namespace {

constexpr int kFormatVersion = 1;

std::string next_line(std::istream& is, int& line_no) {
  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty()) return line;
  }
  throw InputError("model file: unexpected end of input after line " + std::to_string(line_no));
}

[[noreturn]] void fail(int line_no, const std::string& what) {
  throw InputError("model file line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

void write_model(std::ostream& os, const ModelRecord& model) {
  const MlpSpec& spec = model.network.spec();
  os << "edd-model " << kFormatVersion << '\n';
  os << "head " << model.head_tag << '\n';
  os << std::setprecision(17);
  for (const auto& [name, value] : model.attributes) os << "attr " << name << ' ' << value << '\n';
  os << "activation " << to_string(spec.activation) << '\n';
  os << "widths";
  for (Eigen::Index w : spec.widths()) os << ' ' << w;
  os << '\n';
  os << "seed " << spec.seed << '\n';
  for (const auto& [name, value] : model.network.params()) {
    os << "param " << name << ' ' << value.rows() << ' ' << value.cols() << '\n';
    for (Eigen::Index i = 0; i < value.rows(); ++i) {
      for (Eigen::Index j = 0; j < value.cols(); ++j) os << (j ? " " : "") << value(i, j);
      os << '\n';
    }
  }
  os << "end\n";
}

ModelRecord read_model(std::istream& is) {
  int line_no = 0;
  std::string key;
  int version = 0;
  {
    std::istringstream ls(next_line(is, line_no));
    if (!(ls >> key >> version) || key != "edd-model") fail(line_no, "missing 'edd-model' header");
    if (version != kFormatVersion) fail(line_no, "unsupported format version " + std::to_string(version));
  }

  ModelRecord out;
  MlpSpec spec;
  bool have_widths = false;
  ParameterSet params;
  for (;;) {
    std::istringstream ls(next_line(is, line_no));
    ls >> key;
    if (key == "end") break;
    if (key == "head") {
      if (!(ls >> out.head_tag)) fail(line_no, "missing head tag");
    } else if (key == "attr") {
      std::string name;
      scalar_t value;
      if (!(ls >> name >> value)) fail(line_no, "malformed attribute");
      out.attributes[name] = value;
    } else if (key == "activation") {
      std::string a;
      ls >> a;
      spec.activation = parse_activation(a);
    } else if (key == "widths") {
      std::vector<Eigen::Index> w;
      Eigen::Index v;
      while (ls >> v) w.push_back(v);
      if (w.size() < 3) fail(line_no, "need input, at least one hidden and output width");
      spec.input_dim = w.front();
      spec.output_dim = w.back();
      spec.hidden.assign(w.begin() + 1, w.end() - 1);
      have_widths = true;
    } else if (key == "seed") {
      if (!(ls >> spec.seed)) fail(line_no, "malformed seed");
    } else if (key == "param") {
      std::string name;
      Eigen::Index rows = 0, cols = 0;
      if (!(ls >> name >> rows >> cols) || rows < 1 || cols < 1) fail(line_no, "malformed param header");
      matrix_t value(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i) {
        std::istringstream row(next_line(is, line_no));
        for (Eigen::Index j = 0; j < cols; ++j)
          if (!(row >> value(i, j))) fail(line_no, "expected " + std::to_string(cols) + " values");
      }
      params.add(name, std::move(value));
    } else {
      fail(line_no, "unknown key '" + key + "'");
    }
  }
  if (!have_widths) throw InputError("model file: missing widths");
  if (out.head_tag.empty()) throw InputError("model file: missing head tag");
  out.network = Mlp(std::move(spec), std::move(params));
  return out;
}

void save_model(const std::filesystem::path& path, const ModelRecord& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  write_model(os, model);
  if (!os) throw InputError("failed writing " + path.string());
}

ModelRecord load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read " + path.string());
  return read_model(is);
}

}  // namespace edd
