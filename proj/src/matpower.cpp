#include "gridcase/matpower.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace gridcase::matpower {

namespace {

// MATPOWER column positions (0-based).
namespace bus_col {
constexpr int id = 0, type = 1, pd = 2, qd = 3, gs = 4, bs = 5, area = 6, vm = 7, va = 8,
              base_kv = 9, zone = 10, vmax = 11, vmin = 12;
}
namespace gen_col {
constexpr int bus = 0, pg = 1, qg = 2, qmax = 3, qmin = 4, vg = 5, mbase = 6, status = 7,
              pmax = 8, pmin = 9;
}
namespace br_col {
constexpr int from = 0, to = 1, r = 2, x = 3, b = 4, rate_a = 5, rate_b = 6, rate_c = 7,
              ratio = 8, angle = 9, status = 10, angmin = 11, angmax = 12;
}

constexpr std::size_t kBusCols = 13;
constexpr std::size_t kGenCols = 21;
constexpr std::size_t kLegacyGenCols = 10;
constexpr std::size_t kBranchCols = 13;
constexpr std::size_t kGencostMinCols = 4;

class Scanner {
 public:
  explicit Scanner(std::string_view text) : text_(text) {}

  bool done() const { return pos_ >= text_.size(); }
  char peek() const { return done() ? '\0' : text_[pos_]; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return pos_ - line_start_ + 1; }

  char get() {
    char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      line_start_ = pos_;
    }
    return c;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_, column()); }

  // Skips spaces and tabs (and newlines if requested); collects comments.
  void skip_blank(bool newlines, std::vector<std::string>& comments) {
    while (!done()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || (newlines && c == '\n')) {
        get();
      } else if (c == '.' && text_.substr(pos_, 3) == "...") {
        // line continuation: drop the rest of the line including the newline
        while (!done() && peek() != '\n') get();
        if (!done()) get();
      } else if (c == '%' || c == '#') {
        get();
        std::size_t start = pos_;
        while (!done() && peek() != '\n') get();
        std::string_view body = text_.substr(start, pos_ - start);
        if (!body.empty() && body.back() == '\r') body.remove_suffix(1);
        comments.emplace_back(body);
      } else {
        break;
      }
    }
  }

  std::string_view word() {
    std::size_t start = pos_;
    while (!done()) {
      char c = peek();
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
        get();
      } else {
        break;
      }
    }
    return text_.substr(start, pos_ - start);
  }

  std::string_view number_token() {
    std::size_t start = pos_;
    while (!done()) {
      char c = peek();
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '+' || c == '-') {
        get();
      } else {
        break;
      }
    }
    return text_.substr(start, pos_ - start);
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    get();
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t line_start_ = 0;
};

double parse_number(std::string_view token, const Scanner& scan) {
  if (token == "Inf" || token == "inf" || token == "+Inf") return kInf;
  if (token == "-Inf" || token == "-inf") return -kInf;
  std::string_view digits = token;
  if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
  double value = 0.0;
  auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || end != digits.data() + digits.size() || std::isnan(value)) {
    scan.fail("non-numeric entry '" + std::string(token) + "'");
  }
  return value;
}

Table parse_matrix(Scanner& scan, std::vector<std::string>& comments) {
  scan.expect('[');
  Table rows;
  Row current;
  auto close_row = [&] {
    if (!current.empty()) rows.push_back(std::move(current));
    current.clear();
  };
  while (true) {
    scan.skip_blank(false, comments);
    if (scan.done()) scan.fail("unterminated matrix");
    char c = scan.peek();
    if (c == ']') {
      scan.get();
      close_row();
      break;
    }
    if (c == ';' || c == '\n') {
      scan.get();
      close_row();
    } else if (c == ',') {
      scan.get();
    } else {
      std::string_view token = scan.number_token();
      if (token.empty()) scan.fail(std::string("unexpected character '") + c + "' in matrix");
      current.push_back(parse_number(token, scan));
    }
  }
  return rows;
}

std::vector<std::string> parse_cell(Scanner& scan, std::vector<std::string>& comments) {
  scan.expect('{');
  std::vector<std::string> out;
  while (true) {
    scan.skip_blank(true, comments);
    if (scan.done()) scan.fail("unterminated cell array");
    char c = scan.peek();
    if (c == '}') {
      scan.get();
      break;
    }
    if (c == ';' || c == ',') {
      scan.get();
    } else if (c == '\'') {
      scan.get();
      std::string value;
      while (!scan.done() && scan.peek() != '\'') value.push_back(scan.get());
      scan.expect('\'');
      out.push_back(std::move(value));
    } else {
      scan.fail(std::string("unexpected character '") + c + "' in cell array");
    }
  }
  return out;
}

void check_columns(const Table& table, std::string_view name, std::size_t min_cols,
                   std::size_t alt_min = 0) {
  for (std::size_t i = 0; i < table.size(); ++i) {
    std::size_t n = table[i].size();
    if (n >= min_cols || (alt_min != 0 && n >= alt_min)) continue;
    std::ostringstream msg;
    msg << "mpc." << name << " row " << (i + 1) << " has " << n << " columns, expected at least "
        << min_cols;
    throw ParseError(msg.str(), 0, 0);
  }
}

void check_gencost(const Table& table) {
  check_columns(table, "gencost", kGencostMinCols);
  for (std::size_t i = 0; i < table.size(); ++i) {
    const Row& row = table[i];
    double n = row[3];
    std::size_t needed = 4 + static_cast<std::size_t>(std::max(0.0, row[0] == 1.0 ? 2 * n : n));
    if (row.size() < needed) {
      std::ostringstream msg;
      msg << "mpc.gencost row " << (i + 1) << " declares " << n << " cost terms but has only "
          << row.size() << " columns";
      throw ParseError(msg.str(), 0, 0);
    }
  }
}

double at(const Row& row, int col) {
  return static_cast<std::size_t>(col) < row.size() ? row[col] : 0.0;
}

BusKind bus_kind_from_code(double code, std::size_t row) {
  if (code == 1.0) return BusKind::pq;
  if (code == 2.0) return BusKind::pv;
  if (code == 3.0) return BusKind::slack;
  if (code == 4.0) return BusKind::inactive;
  std::ostringstream msg;
  msg << "bus row " << (row + 1) << " has unsupported type code " << code;
  throw DataError(msg.str());
}

int bus_kind_code(BusKind kind) {
  switch (kind) {
    case BusKind::pq: return 1;
    case BusKind::pv: return 2;
    case BusKind::slack: return 3;
    case BusKind::inactive: return 4;
  }
  return 1;
}

CostPoly lower_cost(const Row& row, std::size_t index) {
  if (row[0] == 1.0) {
    std::ostringstream msg;
    msg << "gencost row " << (index + 1) << " is piecewise linear, which is not supported";
    throw DataError(msg.str());
  }
  if (row[0] != 2.0) {
    std::ostringstream msg;
    msg << "gencost row " << (index + 1) << " has unknown cost model " << row[0];
    throw DataError(msg.str());
  }
  auto n = static_cast<std::size_t>(row[3]);
  std::vector<double> coeffs(row.begin() + 4, row.begin() + 4 + static_cast<std::ptrdiff_t>(n));
  // Highest order first; anything above quadratic must vanish.
  while (coeffs.size() > 3) {
    if (coeffs.front() != 0.0) {
      std::ostringstream msg;
      msg << "gencost row " << (index + 1) << " has a polynomial of degree " << (coeffs.size() - 1)
          << "; at most quadratic is supported";
      throw DataError(msg.str());
    }
    coeffs.erase(coeffs.begin());
  }
  CostPoly cost;
  std::size_t k = coeffs.size();
  if (k >= 1) cost.c0 = coeffs[k - 1];
  if (k >= 2) cost.c1 = coeffs[k - 2];
  if (k >= 3) cost.c2 = coeffs[k - 3];
  return cost;
}

double angle_bound_from_degrees(double deg, bool lower_side) {
  if (lower_side ? deg <= -360.0 : deg >= 360.0) return lower_side ? -kInf : kInf;
  return deg_to_rad(deg);
}

double angle_bound_to_degrees(double rad, bool lower_side) {
  if (std::isinf(rad)) return lower_side ? -360.0 : 360.0;
  return rad_to_deg(rad);
}

}  // namespace

ParseError::ParseError(const std::string& what, std::size_t line, std::size_t column)
    : DataError(line == 0 ? what
                          : what + " (line " + std::to_string(line) + ", column " +
                                std::to_string(column) + ")"),
      line_(line),
      column_(column) {}

CaseFile parse(std::string_view text) {
  CaseFile file;
  Scanner scan(text);
  bool have_bus = false;
  bool have_gen = false;
  bool have_branch = false;
  bool have_base = false;

  while (true) {
    scan.skip_blank(true, file.comments);
    if (scan.done()) break;
    if (scan.peek() == ';') {
      scan.get();
      continue;
    }
    std::size_t stmt_line = scan.line();
    std::size_t stmt_col = scan.column();
    std::string_view head = scan.word();
    if (head.empty()) scan.fail(std::string("unexpected character '") + scan.peek() + "'");

    if (head == "function") {
      scan.skip_blank(false, file.comments);
      std::string_view out_name = scan.word();
      scan.skip_blank(false, file.comments);
      if (out_name.empty() || scan.peek() != '=') scan.fail("malformed function header");
      scan.get();
      scan.skip_blank(false, file.comments);
      file.name = std::string(scan.word());
      continue;
    }
    if (head.substr(0, 4) != "mpc.") {
      throw ParseError("unexpected statement '" + std::string(head) + "'", stmt_line, stmt_col);
    }
    std::string_view field = head.substr(4);
    scan.skip_blank(false, file.comments);
    scan.expect('=');
    scan.skip_blank(true, file.comments);

    char c = scan.peek();
    if (c == '[') {
      Table table = parse_matrix(scan, file.comments);
      if (field == "bus") {
        file.bus = std::move(table);
        have_bus = true;
      } else if (field == "gen") {
        file.gen = std::move(table);
        have_gen = true;
      } else if (field == "branch") {
        file.branch = std::move(table);
        have_branch = true;
      } else if (field == "gencost") {
        file.gencost = std::move(table);
      }
      // other numeric tables (areas, bus_name, ...) are not carried
    } else if (c == '{') {
      auto cells = parse_cell(scan, file.comments);
      if (field == "genfuel") file.genfuel = std::move(cells);
    } else if (c == '\'') {
      scan.get();
      while (!scan.done() && scan.peek() != '\'') scan.get();
      scan.expect('\'');
    } else {
      std::string_view token = scan.number_token();
      if (token.empty()) scan.fail("expected a value after '='");
      double value = parse_number(token, scan);
      if (field == "baseMVA") {
        file.base_mva = value;
        have_base = true;
      }
    }
    scan.skip_blank(false, file.comments);
    if (scan.peek() == ';') scan.get();
  }

  if (!have_base) throw ParseError("missing mpc.baseMVA", 0, 0);
  if (!have_bus) throw ParseError("missing mpc.bus", 0, 0);
  if (!have_gen) throw ParseError("missing mpc.gen", 0, 0);
  if (!have_branch) throw ParseError("missing mpc.branch", 0, 0);
  check_columns(file.bus, "bus", kBusCols);
  check_columns(file.gen, "gen", kGenCols, kLegacyGenCols);
  check_columns(file.branch, "branch", kBranchCols);
  check_gencost(file.gencost);
  if (!file.genfuel.empty() && file.genfuel.size() != file.gen.size()) {
    throw ParseError("mpc.genfuel length does not match mpc.gen", 0, 0);
  }
  return file;
}

CaseFile read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open case file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  CaseFile file = parse(buffer.str());
  if (file.name.empty()) {
    auto slash = path.find_last_of('/');
    std::string stem = path.substr(slash == std::string::npos ? 0 : slash + 1);
    if (auto dot = stem.rfind(".m"); dot != std::string::npos && dot + 2 == stem.size()) {
      stem.resize(dot);
    }
    file.name = stem;
  }
  return file;
}

Network lower(const CaseFile& file) {
  if (!(file.base_mva > 0.0)) throw DataError("baseMVA must be positive");
  const double base = file.base_mva;
  Network net;
  net.name = file.name;
  net.base_mva = base;

  net.buses.reserve(file.bus.size());
  for (std::size_t i = 0; i < file.bus.size(); ++i) {
    const Row& row = file.bus[i];
    Bus bus;
    bus.id = static_cast<int>(row[bus_col::id]);
    bus.kind = bus_kind_from_code(row[bus_col::type], i);
    bus.pd = row[bus_col::pd] / base;
    bus.qd = row[bus_col::qd] / base;
    bus.gs = row[bus_col::gs] / base;
    bus.bs = row[bus_col::bs] / base;
    bus.v_init = row[bus_col::vm];
    bus.theta_init = deg_to_rad(row[bus_col::va]);
    bus.base_kv = row[bus_col::base_kv];
    bus.v_max = row[bus_col::vmax];
    bus.v_min = row[bus_col::vmin];
    net.buses.push_back(bus);
  }

  net.branches.reserve(file.branch.size());
  for (std::size_t k = 0; k < file.branch.size(); ++k) {
    const Row& row = file.branch[k];
    Branch br;
    br.from_bus = static_cast<int>(row[br_col::from]);
    br.to_bus = static_cast<int>(row[br_col::to]);
    br.r = row[br_col::r];
    br.x = row[br_col::x];
    if (br.x == 0.0) {
      throw DataError("branch row " + std::to_string(k + 1) + " has zero reactance");
    }
    br.b_charge = row[br_col::b];
    double rate = row[br_col::rate_a];
    if (rate != 0.0) br.rate_a = rate / base;
    br.tap = row[br_col::ratio] == 0.0 ? 1.0 : row[br_col::ratio];
    br.shift = deg_to_rad(row[br_col::angle]);
    br.in_service = row[br_col::status] != 0.0;
    double angmin = row[br_col::angmin];
    double angmax = row[br_col::angmax];
    if (angmin == 0.0 && angmax == 0.0) {
      br.angle_min = -kInf;
      br.angle_max = kInf;
    } else {
      br.angle_min = angle_bound_from_degrees(angmin, true);
      br.angle_max = angle_bound_from_degrees(angmax, false);
    }
    net.branches.push_back(br);
  }

  net.generators.reserve(file.gen.size());
  for (std::size_t g = 0; g < file.gen.size(); ++g) {
    const Row& row = file.gen[g];
    Generator gen;
    gen.bus = static_cast<int>(at(row, gen_col::bus));
    gen.pg = at(row, gen_col::pg) / base;
    gen.qg = at(row, gen_col::qg) / base;
    gen.q_max = at(row, gen_col::qmax) / base;
    gen.q_min = at(row, gen_col::qmin) / base;
    gen.v_set = at(row, gen_col::vg);
    gen.in_service = at(row, gen_col::status) > 0.0;
    gen.p_max = at(row, gen_col::pmax) / base;
    gen.p_min = at(row, gen_col::pmin) / base;
    if (g < file.gencost.size()) gen.cost = lower_cost(file.gencost[g], g);
    if (g < file.genfuel.size()) gen.fuel = parse_fuel_label(file.genfuel[g]);
    net.generators.push_back(gen);
  }
  return net;
}

CaseFile build(const Network& net, std::vector<std::string> comments) {
  const double base = net.base_mva;
  CaseFile file;
  file.name = net.name;
  file.base_mva = base;
  file.comments = std::move(comments);

  for (const Bus& bus : net.buses) {
    Row row(kBusCols, 0.0);
    row[bus_col::id] = bus.id;
    row[bus_col::type] = bus_kind_code(bus.kind);
    row[bus_col::pd] = bus.pd * base;
    row[bus_col::qd] = bus.qd * base;
    row[bus_col::gs] = bus.gs * base;
    row[bus_col::bs] = bus.bs * base;
    row[bus_col::area] = 1;
    row[bus_col::vm] = bus.v_init;
    row[bus_col::va] = rad_to_deg(bus.theta_init);
    row[bus_col::base_kv] = bus.base_kv;
    row[bus_col::zone] = 1;
    row[bus_col::vmax] = bus.v_max;
    row[bus_col::vmin] = bus.v_min;
    file.bus.push_back(std::move(row));
  }

  bool any_fuel = false;
  for (const Generator& gen : net.generators) {
    Row row(kGenCols, 0.0);
    row[gen_col::bus] = gen.bus;
    row[gen_col::pg] = gen.pg * base;
    row[gen_col::qg] = gen.qg * base;
    row[gen_col::qmax] = gen.q_max * base;
    row[gen_col::qmin] = gen.q_min * base;
    row[gen_col::vg] = gen.v_set;
    row[gen_col::mbase] = base;
    row[gen_col::status] = gen.in_service ? 1 : 0;
    row[gen_col::pmax] = gen.p_max * base;
    row[gen_col::pmin] = gen.p_min * base;
    file.gen.push_back(std::move(row));
    file.gencost.push_back({2, 0, 0, 3, gen.cost.c2, gen.cost.c1, gen.cost.c0});
    any_fuel = any_fuel || gen.fuel.has_value();
  }
  if (any_fuel) {
    for (const Generator& gen : net.generators) {
      file.genfuel.emplace_back(gen.fuel ? to_string(*gen.fuel) : "unknown");
    }
  }

  for (const Branch& br : net.branches) {
    Row row(kBranchCols, 0.0);
    row[br_col::from] = br.from_bus;
    row[br_col::to] = br.to_bus;
    row[br_col::r] = br.r;
    row[br_col::x] = br.x;
    row[br_col::b] = br.b_charge;
    row[br_col::rate_a] = br.rate_a ? *br.rate_a * base : 0.0;
    row[br_col::ratio] = br.tap == 1.0 ? 0.0 : br.tap;
    row[br_col::angle] = rad_to_deg(br.shift);
    row[br_col::status] = br.in_service ? 1 : 0;
    row[br_col::angmin] = angle_bound_to_degrees(br.angle_min, true);
    row[br_col::angmax] = angle_bound_to_degrees(br.angle_max, false);
    file.branch.push_back(std::move(row));
  }
  return file;
}

std::string format_number(double value) {
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  if (value == 0.0) return "0";  // folds -0
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, end);
}

namespace {

void write_table(std::ostringstream& out, std::string_view name, const Table& table) {
  out << "mpc." << name << " = [\n";
  for (const Row& row : table) {
    out << '\t';
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << '\t';
      out << format_number(row[i]);
    }
    out << ";\n";
  }
  out << "];\n\n";
}

}  // namespace

std::string write_case(const CaseFile& file) {
  std::ostringstream out;
  out << "function mpc = " << (file.name.empty() ? "case" : file.name) << "\n";
  for (const std::string& line : file.comments) out << '%' << line << '\n';
  out << "\nmpc.version = '2';\n";
  out << "mpc.baseMVA = " << format_number(file.base_mva) << ";\n\n";
  write_table(out, "bus", file.bus);
  write_table(out, "gen", file.gen);
  write_table(out, "branch", file.branch);
  if (!file.gencost.empty()) write_table(out, "gencost", file.gencost);
  if (!file.genfuel.empty()) {
    out << "mpc.genfuel = {\n";
    for (const std::string& fuel : file.genfuel) out << "\t'" << fuel << "';\n";
    out << "};\n";
  }
  return out.str();
}

std::string write(const Network& net, const std::vector<std::string>& provenance) {
  return write_case(build(net, provenance));
}

}  // namespace gridcase::matpower
