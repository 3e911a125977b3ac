#include <doctest.h>

#include <set>

#include "clustersim/bench.h"
#include "clustersim/report.h"

using namespace csim;

namespace {

std::string error_of(const std::string& text) {
  try {
    bench::parse_suite(text, "s.suite");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* kPair = R"(
# small matmul in both modes
[bench]
name = m
kind = matmul
mode = mimd
M = 32
N = 16
Kd = 64

[bench]
kind = matmul
mode = vlem
M = 32
N = 16
Kd = 64
baseline = m
group = g
)";

}  // namespace

TEST_CASE("suite parsing") {
  auto cases = bench::parse_suite(kPair);
  REQUIRE(cases.size() == 2);
  CHECK(cases[0].name == "m");
  CHECK(cases[1].name == "bench1");
  CHECK(cases[1].opt.mode == kernels::ExecMode::VLEM);
  CHECK(cases[1].matmul.Kd == 64);
  CHECK(cases[1].baseline == "m");

  auto c = bench::parse_suite("[bench]\nact_bits=4\nwgt_signed=false\nblocking=4x2\nbroadcast=0\npath=sw\n")[0];
  CHECK(c.conv.act_bits == 4);
  CHECK(c.matmul.act_bits == 4);
  CHECK_FALSE(c.conv.wgt_signed);
  REQUIRE(c.opt.blocking);
  CHECK(c.opt.blocking->pixels == 4);
  CHECK(c.opt.blocking->channels == 2);
  CHECK(c.broadcast == false);
  CHECK(c.opt.path == kernels::Path::Software);
}

TEST_CASE("suite errors carry file and line") {
  CHECK(error_of("") == "s.suite: suite has no [bench] blocks");
  CHECK(error_of("# only comments\n\n") == "s.suite: suite has no [bench] blocks");
  CHECK(error_of("H=3\n") == "s.suite:1: key outside a [bench] block");
  CHECK(error_of("[bench]\n\nfoo=1\n") == "s.suite:3: unknown key 'foo'");
  CHECK(error_of("[bench]\nH=1\nH=2\n") == "s.suite:3: duplicate key 'H'");
  CHECK(error_of("[bench]\nmode=simt\n").find("s.suite:2: mode") == 0);
  CHECK(error_of("[bench]\nblocking=4\n").find("s.suite:2: blocking") == 0);
  CHECK(error_of("[bench]\nH=-1\n").find("s.suite:2:") == 0);
  CHECK(error_of("[bench]\nname=a\n[bench]\nname=a\n") == "s.suite:3: duplicate bench name 'a'");
  CHECK(error_of("[bench]\nbaseline=zz\n") == "s.suite:1: baseline 'zz' does not name another bench");
  CHECK(error_of("[bench]\nname=a\nbaseline=a\n").find("baseline 'a'") != std::string::npos);
  CHECK(error_of("[benches]\n").find("s.suite:1: unknown section") == 0);
  CHECK(error_of("[bench]\nH\n") == "s.suite:2: expected key=value");
}

TEST_CASE("suite results are independent of the job count") {
  auto cases = bench::parse_suite(kPair);
  auto a = bench::run_suite(cases, {}, energy::default_params(), 1);
  auto b = bench::run_suite(cases, {}, energy::default_params(), 4);
  REQUIRE(a.rows.size() == 2);
  CHECK(report::suite_csv(a) == report::suite_csv(b));
  CHECK(a.rows[0].result.verification.ok);
  CHECK(a.rows[1].result.verification.ok);

  double c0 = double(a.rows[0].result.metrics.cycles), c1 = double(a.rows[1].result.metrics.cycles);
  REQUIRE(a.rows[1].overhead_pct);
  CHECK(*a.rows[1].overhead_pct == doctest::Approx(100.0 * (c1 / c0 - 1.0)));
  CHECK(*a.rows[1].speedup == doctest::Approx(c0 / c1));
  CHECK_FALSE(a.rows[0].overhead_pct);
  REQUIRE(a.groups.size() == 1);
  CHECK(a.groups[0].name == "g");
  CHECK(a.groups[0].cycles == a.rows[1].result.metrics.cycles);
}

TEST_CASE("re-pricing matches a fresh run with the new parameters") {
  auto cases = bench::parse_suite(kPair);
  energy::Params p = energy::default_params();
  auto base = bench::run_suite(cases, {}, p);
  p.idex_active = 4.0;
  p.broadcast_traversal = 0.1;
  auto fresh = bench::run_suite(cases, {}, p);
  auto re = bench::reprice(base, p);
  for (size_t i = 0; i < fresh.rows.size(); ++i) {
    CHECK(re.rows[i].result.energy.total_pJ == doctest::Approx(fresh.rows[i].result.energy.total_pJ));
    CHECK(*re.rows[1].energy_delta_pct == doctest::Approx(*fresh.rows[1].energy_delta_pct));
  }
}

TEST_CASE("broadcast override and seeds") {
  auto cases = bench::parse_suite("[bench]\nbroadcast=false\nseed=7\n[bench]\n");
  ClusterConfig cfg;
  CHECK_FALSE(bench::config_for(cases[0], cfg).broadcast_enabled);
  CHECK(bench::config_for(cases[1], cfg).broadcast_enabled);
  CHECK(bench::build_kernel(cases[0], 1).source == bench::build_kernel(cases[0], 99).source);
  CHECK(bench::build_kernel(cases[1], 1).source != bench::build_kernel(cases[1], 99).source);
}

TEST_CASE("FNV-1a reference values") {
  CHECK(report::fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(report::fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(report::fnv1a("foobar") == 0x85944171f73967e8ull);
  CHECK(report::hash_hex(0xabcull) == "0000000000000abc");
}

TEST_CASE("report JSON schema") {
  auto s = bench::run_suite(bench::parse_suite(kPair), {}, energy::default_params());
  const auto& r = s.rows[1].result;
  auto j = report::metrics_json(r.metrics, r.activity, energy::default_params(), true);
  for (const char* k : {"cycles", "instructions_retired", "per_core", "tcdm", "vlem", "energy", "macs",
                        "macs_per_cycle", "verified"}) {
    CHECK_MESSAGE(j.contains(k), k);
  }
  std::set<std::string> tcdm, vlem, en;
  for (auto& [k, v] : j["tcdm"].items()) tcdm.insert(k);
  for (auto& [k, v] : j["vlem"].items()) vlem.insert(k);
  for (auto& [k, v] : j["energy"].items()) en.insert(k);
  CHECK(tcdm == std::set<std::string>{"accesses", "conflict_stall_cycles", "broadcasts"});
  CHECK(vlem == std::set<std::string>{"entries", "exits", "cycles_in_vlem"});
  CHECK(en == std::set<std::string>{"total_pJ", "by_unit", "pJ_per_cycle"});
  CHECK(j["per_core"].size() == 16);
  CHECK(j["energy"]["by_unit"].size() == energy::kUnits);
  CHECK(j["cycles"].get<uint64_t>() == r.metrics.cycles);
  CHECK(j["vlem"]["entries"].get<uint64_t>() == 1);
  CHECK(j["verified"].get<bool>());
  CHECK(report::metrics_json(r.metrics, r.activity, energy::default_params(), std::nullopt)["verified"].is_null());

  double sum = 0;
  for (const auto& c : j["per_core"]) sum += c["energy_pJ"].get<double>();
  CHECK(sum == doctest::Approx(j["energy"]["total_pJ"].get<double>()));
}

TEST_CASE("config echo is typed") {
  ClusterConfig c;
  c.broadcast_enabled = false;
  auto j = report::kv_json(to_key_values(c));
  CHECK(j["broadcast_enabled"].is_boolean());
  CHECK_FALSE(j["broadcast_enabled"].get<bool>());
  CHECK(j["n_cores"].get<unsigned>() == 16);
  CHECK(j["tcdm_base"].get<uint64_t>() == 0x10000000u);
  auto e = report::kv_json(energy::to_key_values(energy::default_params()));
  CHECK(e["icache_l0_access"].get<double>() == doctest::Approx(1.26));
}

TEST_CASE("CSV has a header and one row per bench") {
  auto s = bench::run_suite(bench::parse_suite(kPair), {}, energy::default_params());
  std::string csv = report::suite_csv(s);
  CHECK(csv.rfind(report::csv_header() + "\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  auto columns = [](const std::string& line) { return std::count(line.begin(), line.end(), ',') + 1; };
  CHECK(columns(report::csv_row(s.rows[0])) == columns(report::csv_header()));
  CHECK(report::csv_row(s.rows[0]).rfind("m,matmul,mimd,hardware,misaligned,8,8,", 0) == 0);
}

TEST_CASE("expectation files") {
  std::vector<kernels::Expect> e{{0x10000000, 4, 0xdeadbeef}, {0x10000004, 1, 0x7f}, {0x10000006, 2, 0x1234}};
  auto back = kernels::parse_expect(kernels::format_expect(e));
  REQUIRE(back.size() == e.size());
  for (size_t i = 0; i < e.size(); ++i) {
    CHECK(back[i].addr == e[i].addr);
    CHECK(back[i].width == e[i].width);
    CHECK(back[i].value == e[i].value);
  }
  auto err = [](const std::string& t) {
    try {
      kernels::parse_expect(t, "x.expect");
    } catch (const ConfigError& ex) {
      return std::string(ex.what());
    }
    return std::string();
  };
  CHECK(err("0x10 3 1\n").rfind("x.expect:1: width", 0) == 0);
  CHECK(err("\n0x10 1 0x100\n").rfind("x.expect:2:", 0) == 0);
  CHECK(err("0x10 4\n").rfind("x.expect:1:", 0) == 0);
  CHECK(err("0x10 4 1 2\n").rfind("x.expect:1:", 0) == 0);
}

TEST_CASE("shipped configuration files") {
  std::string dir = CSIM_SOURCE_DIR;
  auto params = energy::params_from(parse_key_values(read_text_file(dir + "/config/energy_default.params")),
                                    energy::Params{});
  CHECK(energy::to_key_values(params) == energy::to_key_values(energy::default_params()));
  auto cfg = cluster_config_from(parse_key_values(read_text_file(dir + "/config/cluster.cfg")));
  CHECK(to_key_values(cfg) == to_key_values(ClusterConfig{}));
}

TEST_CASE("shipped suites parse") {
  std::string dir = CSIM_SOURCE_DIR;
  for (const char* f : {"conflict_ladder", "format_sweep", "mini_cnn"}) {
    std::string path = dir + "/suites/" + f + ".suite";
    CHECK_NOTHROW(bench::parse_suite(read_text_file(path), path));
  }
  auto fs = bench::parse_suite(read_text_file(dir + "/suites/format_sweep.suite"));
  std::set<std::pair<unsigned, unsigned>> pairs;
  for (const auto& c : fs) pairs.insert({c.conv.act_bits, c.conv.wgt_bits});
  CHECK(pairs.size() == 10);
}
