#include "selfavg/table_io.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace selfavg;

namespace {
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("selfavg_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

SequenceTable small_table() {
    RouletteKernel k;
    return build_table(k, 12);
}
} // namespace

TEST_CASE("native dump round-trips bit for bit") {
    TempDir tmp;
    const auto t = small_table();
    save_table(t, tmp.file("t.native.json"), TableFormat::native);
    const auto r = load_table(tmp.file("t.native.json"), true);
    CHECK(r.kernel_name == t.kernel_name);
    CHECK(r.n_max == t.n_max);
    CHECK(r.precision_bits == t.precision_bits);
    for (size_t i = 0; i < t.values.size(); ++i) CHECK(t.values[i] == r.values[i]);
    CHECK(r.residuals == t.residuals);
    CHECK(r.row_bits == t.row_bits);
}

TEST_CASE("json dump preserves doubles; full precision load is refused") {
    TempDir tmp;
    const auto t = small_table();
    save_table(t, tmp.file("t.json"), TableFormat::json);
    const auto r = load_table(tmp.file("t.json"));
    for (long n = 0; n <= t.n_max; ++n) CHECK(r.value(n) == t.value(n));
    CHECK_THROWS_AS(load_table(tmp.file("t.json"), true), std::runtime_error);
}

TEST_CASE("csv export carries n,p,residual rows") {
    TempDir tmp;
    const auto t = small_table();
    save_table(t, tmp.file("t.csv"), TableFormat::csv);
    std::ifstream in(tmp.file("t.csv"));
    std::string header, row0, row1, row2, row3;
    std::getline(in, header);
    std::getline(in, row0);
    std::getline(in, row1);
    std::getline(in, row2);
    std::getline(in, row3);
    CHECK(header == "n,p,residual");
    CHECK(row0.rfind("0,1,", 0) == 0);
    CHECK(row1.rfind("1,0,", 0) == 0);
    CHECK(row3.rfind("3,0.25,", 0) == 0);
}

TEST_CASE("identical saves produce identical bytes") {
    TempDir tmp;
    const auto t = small_table();
    save_table(t, tmp.file("a.json"), TableFormat::native);
    save_table(t, tmp.file("b.json"), TableFormat::native);
    std::ifstream a(tmp.file("a.json"), std::ios::binary);
    std::ifstream b(tmp.file("b.json"), std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    CHECK(!sa.empty());
}

TEST_CASE("format_double round-trips and format names parse") {
    for (double v : {0.25, 1.0 / 3.0, 2.718281828459045, 1e-300}) {
        const std::string s = format_double(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
    CHECK(format_from_name("json") == TableFormat::json);
    CHECK(format_from_name("csv") == TableFormat::csv);
    CHECK(format_from_name("native") == TableFormat::native);
    CHECK_THROWS_AS(format_from_name("yaml"), std::invalid_argument);
}
