#pragma once
// Run manifests: every output file gets a <name>.manifest.json sidecar with
// the command, full parameter set, input/output digests and wall time.
// Outputs themselves contain no timestamps, so equal manifests (same command,
// parameters and input digests) imply byte-identical outputs.

#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace selfavg::cli {

inline std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot digest missing file: " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr) throw std::runtime_error("EVP_MD_CTX_new failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        if (in.gcount() > 0)
            EVP_DigestUpdate(ctx, buf, static_cast<size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

class ManifestWriter {
  public:
    ManifestWriter(std::string command) : command_(std::move(command)) {
        start_ = std::chrono::steady_clock::now();
    }

    template <typename T>
    void param(const std::string& key, const T& value) {
        params_[key] = value;
    }
    void input(const std::string& path) { inputs_.push_back(path); }
    void output(const std::string& path) { outputs_.push_back(path); }

    void write() const {
        if (outputs_.empty()) return;
        nlohmann::json j;
        j["tool"] = "selfavg";
        j["version"] = "0.1.0";
        j["command"] = command_;
        j["parameters"] = params_;
        nlohmann::json in = nlohmann::json::object();
        for (const auto& p : inputs_) in[p] = sha256_file(p);
        j["inputs"] = std::move(in);
        nlohmann::json out = nlohmann::json::object();
        for (const auto& p : outputs_) out[p] = sha256_file(p);
        j["outputs"] = std::move(out);
        j["wall_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start_)
                           .count();
        const std::string path = outputs_.front() + ".manifest.json";
        std::ofstream f(path, std::ios::trunc);
        f << j.dump(1, '\t') << "\n";
    }

  private:
    std::string command_;
    nlohmann::json params_ = nlohmann::json::object();
    std::vector<std::string> inputs_;
    std::vector<std::string> outputs_;
    std::chrono::steady_clock::time_point start_;
};

} // namespace selfavg::cli
