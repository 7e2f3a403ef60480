#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "magstep/cli.hpp"

namespace fs = std::filesystem;

namespace magstep {

Json record_to_json(const ResultRecord& r) {
  Json j;
  j["config_hash"] = r.config_hash;
  j["command"] = r.command;
  j["timestamp"] = r.timestamp;
  j["outputs"] = r.outputs;
  j["diagnostics"] = r.diagnostics;
  j["files"] = r.files;
  j["exit_code"] = r.exit_code;
  return j;
}

ResultRecord record_from_json(const Json& j) {
  ResultRecord r;
  r.config_hash = j.at("config_hash").get<std::string>();
  r.command = j.at("command").get<std::string>();
  r.timestamp = j.at("timestamp").get<std::string>();
  r.outputs = j.at("outputs");
  r.diagnostics = j.at("diagnostics");
  r.files = j.at("files").get<FileSet>();
  r.exit_code = j.at("exit_code").get<int>();
  return r;
}

void atomic_write(const std::string& path, const std::string& contents) {
  static std::atomic<unsigned> counter{0};
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  std::ostringstream tmp_name;
  tmp_name << target.filename().string() << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id())
           << "." << counter++;
  const fs::path tmp = target.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), std::streamsize(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("rename to " + path + " failed: " + ec.message());
  }
}

std::string Cache::path_for(const std::string& key) const {
  return (fs::path(dir_) / (key + ".json")).string();
}

// Entry layout: {"checksum": sha256(record dump), "record": {...}}.
std::optional<ResultRecord> Cache::load(const std::string& key) const {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    const Json entry = Json::parse(ss.str());
    const Json& rec = entry.at("record");
    if (sha256_hex(rec.dump()) != entry.at("checksum").get<std::string>()) return std::nullopt;
    return record_from_json(rec);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void Cache::store(const std::string& key, const ResultRecord& r) const {
  const Json rec = record_to_json(r);
  Json entry;
  entry["checksum"] = sha256_hex(rec.dump());
  entry["record"] = rec;
  atomic_write(path_for(key), entry.dump(1) + "\n");
}

}  // namespace magstep
