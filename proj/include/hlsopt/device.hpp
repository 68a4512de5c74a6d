#pragma once

// Device model: operation latency table, memory bank parameters, port counts
// and resource capacities. The default configuration is the one pinned by the
// test suite: two DRAM banks of 19.2 GB/s behind 64-byte buses at 200 MHz,
// single-cycle integer arithmetic, 8-cycle floating point addition.

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hlsopt/ir.hpp"
#include "hlsopt/support.hpp"

namespace hlsopt {

struct BankConfig {
  double bandwidth_bytes_per_s = 19.2e9;
  int bus_width_bytes = 64;
  int read_ports = 1;   // requests issued per cycle
  int write_ports = 1;
};

struct DeviceConfig {
  double clock_hz = 200e6;
  std::vector<BankConfig> banks = {BankConfig{}, BankConfig{}};

  int ram_read_latency = 1;
  int register_read_latency = 0;
  int fifo_latency = 1;          // pop/push
  int offchip_read_latency = 1;  // issue latency per request
  int ram_read_ports = 1;
  int ram_write_ports = 1;

  /// Overrides keyed "op.type" (e.g. "add.f32") or "op.class" ("add.float",
  /// "add.int", "add.fixed").
  std::map<std::string, int> latency_overrides;

  long long onchip_bits_capacity = 1LL << 25;  // 32 Mbit
  long long register_capacity_elems = 1024;
  int fifo_count_capacity = 256;
  std::map<std::string, long long> compute_unit_capacity;  // 0/absent = unbounded

  int num_banks() const { return static_cast<int>(banks.size()); }

  const BankConfig& bank(int i) const {
    static const BankConfig fallback{};
    if (i < 0 || i >= num_banks()) return fallback;
    return banks[i];
  }

  // -- latency lookups ------------------------------------------------------

  static const char* op_name(BinOp op) {
    switch (op) {
      case BinOp::Add: return "add";
      case BinOp::Sub: return "sub";
      case BinOp::Mul: return "mul";
      case BinOp::Div: return "div";
      case BinOp::Mod: return "mod";
      case BinOp::Min: return "min";
      case BinOp::Max: return "max";
      case BinOp::Lt:
      case BinOp::Le:
      case BinOp::Eq: return "cmp";
    }
    return "op";
  }

  static std::string type_class(const DataType& t) {
    switch (t.kind) {
      case TypeKind::Float: return "float";
      case TypeKind::FixedPoint: return "fixed";
      default: return "int";
    }
  }

  int default_latency(const std::string& op, const DataType& t) const {
    bool flt = t.kind == TypeKind::Float;
    if (op == "add" || op == "sub") return flt ? 8 : 1;
    if (op == "mul") return flt ? 6 : 3;
    if (op == "div" || op == "mod") return flt ? 24 : 16;
    if (op == "min" || op == "max") return flt ? 2 : 1;
    if (op == "cmp") return 1;
    if (op == "select") return 0;
    if (op == "cast") return 1;
    return 1;
  }

  int op_latency(const std::string& op, const DataType& t) const {
    auto it = latency_overrides.find(op + "." + to_string(t.scalar()));
    if (it != latency_overrides.end()) return it->second;
    it = latency_overrides.find(op + "." + type_class(t));
    if (it != latency_overrides.end()) return it->second;
    it = latency_overrides.find(op);
    if (it != latency_overrides.end()) return it->second;
    return default_latency(op, t);
  }

  int op_latency(BinOp op, const DataType& t) const {
    return op_latency(op_name(op), t);
  }

  int read_latency(const MemorySpace& space) const {
    switch (space.kind) {
      case MemorySpace::Kind::OnChipRam: return ram_read_latency;
      case MemorySpace::Kind::Registers: return register_read_latency;
      case MemorySpace::Kind::Fifo: return fifo_latency;
      case MemorySpace::Kind::OffChip: return offchip_read_latency;
    }
    return 1;
  }
};

// ---------------------------------------------------------------------------
// Config file parsing: line-based `key = value` with dotted keys.
//
//   clock_hz = 200e6
//   banks = 2
//   bank.0.bandwidth = 19.2e9
//   bank.0.bus_width = 64
//   latency.fadd.f32 = 10        # 'f' prefix selects the float class
//   latency.mul.int = 3
//   ram_read_latency = 1
//   capacity.onchip_bits = 33554432
//   capacity.registers = 1024
//   capacity.fifo_count = 256
//   capacity.compute.fmul = 512

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  size_t b = s.find_last_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

// "fadd" -> ("add", float class); "add" stays integer-agnostic.
inline std::pair<std::string, bool> split_float_prefix(const std::string& op) {
  static const char* bases[] = {"add", "sub", "mul", "div", "mod",
                                "min", "max", "cmp", "select", "cast"};
  if (op.size() > 1 && op[0] == 'f') {
    std::string rest = op.substr(1);
    for (const char* b : bases)
      if (rest == b) return {rest, true};
  }
  return {op, false};
}

}  // namespace detail

inline Result<DeviceConfig> parse_device_config(const std::string& text) {
  DeviceConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) {
    return Result<DeviceConfig>::failure("device config line " +
                                         std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) return fail("expected 'key = value'");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value_str = detail::trim(line.substr(eq + 1));
    double value = 0;
    try {
      size_t used = 0;
      value = std::stod(value_str, &used);
      if (used != value_str.size()) return fail("malformed value '" + value_str + "'");
    } catch (...) {
      return fail("malformed value '" + value_str + "'");
    }

    auto parts = detail::split(key, '.');
    const std::string& head = parts[0];
    auto as_int = [&]() { return static_cast<long long>(std::llround(value)); };

    if (head == "clock_hz" && parts.size() == 1) {
      if (value <= 0) return fail("clock_hz must be positive");
      cfg.clock_hz = value;
    } else if (head == "banks" && parts.size() == 1) {
      long long n = as_int();
      if (n < 1 || n > 64) return fail("bank count out of range");
      cfg.banks.resize(static_cast<size_t>(n));
    } else if (head == "bank" && parts.size() == 3) {
      int idx = 0;
      try {
        idx = std::stoi(parts[1]);
      } catch (...) {
        return fail("bad bank index '" + parts[1] + "'");
      }
      if (idx < 0 || idx > 63) return fail("bank index out of range");
      if (idx >= cfg.num_banks()) cfg.banks.resize(static_cast<size_t>(idx) + 1);
      if (parts[2] == "bandwidth") {
        if (value <= 0) return fail("bandwidth must be positive");
        cfg.banks[idx].bandwidth_bytes_per_s = value;
      } else if (parts[2] == "bus_width") {
        if (as_int() < 1) return fail("bus width must be positive");
        cfg.banks[idx].bus_width_bytes = static_cast<int>(as_int());
      } else if (parts[2] == "read_ports") {
        cfg.banks[idx].read_ports = static_cast<int>(as_int());
      } else if (parts[2] == "write_ports") {
        cfg.banks[idx].write_ports = static_cast<int>(as_int());
      } else {
        return fail("unknown bank key '" + parts[2] + "'");
      }
    } else if (head == "latency" && (parts.size() == 2 || parts.size() == 3)) {
      if (value < 0) return fail("negative latency");
      auto [op, is_float] = detail::split_float_prefix(parts[1]);
      std::string suffix =
          parts.size() == 3 ? parts[2] : (is_float ? "float" : "");
      std::string full = suffix.empty() ? op : op + "." + suffix;
      cfg.latency_overrides[full] = static_cast<int>(as_int());
    } else if (head == "ram_read_latency") {
      if (value < 0) return fail("negative latency");
      cfg.ram_read_latency = static_cast<int>(as_int());
    } else if (head == "fifo_latency") {
      if (value < 0) return fail("negative latency");
      cfg.fifo_latency = static_cast<int>(as_int());
    } else if (head == "offchip_read_latency") {
      if (value < 0) return fail("negative latency");
      cfg.offchip_read_latency = static_cast<int>(as_int());
    } else if (head == "ram_read_ports") {
      cfg.ram_read_ports = static_cast<int>(as_int());
    } else if (head == "ram_write_ports") {
      cfg.ram_write_ports = static_cast<int>(as_int());
    } else if (head == "capacity" && parts.size() >= 2) {
      if (parts[1] == "onchip_bits") cfg.onchip_bits_capacity = as_int();
      else if (parts[1] == "registers") cfg.register_capacity_elems = as_int();
      else if (parts[1] == "fifo_count")
        cfg.fifo_count_capacity = static_cast<int>(as_int());
      else if (parts[1] == "compute" && parts.size() == 3) {
        auto [op, is_float] = detail::split_float_prefix(parts[2]);
        cfg.compute_unit_capacity[is_float ? op + ".float" : op] = as_int();
      } else {
        return fail("unknown capacity key '" + parts[1] + "'");
      }
    } else {
      return fail("unknown key '" + key + "'");
    }
  }
  return cfg;
}

inline Result<DeviceConfig> load_device_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) return Result<DeviceConfig>::failure("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_device_config(ss.str());
}

}  // namespace hlsopt
