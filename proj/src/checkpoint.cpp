#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "fcrseg/net.hpp"

// Layout:
//   FCRSEG1\n
//   <key> <int>\n ...             (config fields and epoch)
//   param <name> <ndim> <dims...>\n ...
//   data\n
//   float32 little-endian values for every param, in listed order

namespace fcrseg {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void save_checkpoint(const std::filesystem::path& path, const ModelState& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const NetConfig& c = m.config;
  out << kCheckpointMagic << "\n"
      << "base_filters " << c.base_filters << "\n"
      << "depth " << c.depth << "\n"
      << "out_channels " << c.out_channels << "\n"
      << "in_channels " << c.in_channels << "\n"
      << "input_height " << c.input_height << "\n"
      << "input_width " << c.input_width << "\n"
      << "epoch " << m.epoch << "\n";
  for (const auto& p : m.params) {
    out << "param " << p.name << " " << p.shape.size();
    for (int d : p.shape) out << " " << d;
    out << "\n";
  }
  out << "data\n";
  for (const auto& p : m.params) {
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(float)));
  }
  if (!out) throw IoError("short write on checkpoint " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    throw DataError(path.string() + " is not an " + kCheckpointMagic + " checkpoint");
  }
  ModelState m;
  std::map<std::string, int> fields;
  while (std::getline(in, line) && line != "data") {
    std::istringstream row(line);
    std::string key;
    row >> key;
    if (key == "param") {
      Parameter p;
      std::size_t ndim = 0;
      row >> p.name >> ndim;
      std::size_t count = 1;
      for (std::size_t i = 0; i < ndim; ++i) {
        int d = 0;
        row >> d;
        p.shape.push_back(d);
        count *= static_cast<std::size_t>(d);
      }
      if (!row) throw DataError("malformed param line in " + path.string());
      p.value.resize(count);
      m.params.push_back(std::move(p));
    } else {
      int v = 0;
      if (!(row >> v)) throw DataError("malformed header line in " + path.string());
      fields[key] = v;
    }
  }
  if (line != "data") throw DataError("truncated checkpoint header in " + path.string());
  auto field = [&](const char* key) {
    auto it = fields.find(key);
    if (it == fields.end()) throw DataError(std::string("checkpoint lacks ") + key);
    return it->second;
  };
  m.config.base_filters = field("base_filters");
  m.config.depth = field("depth");
  m.config.out_channels = field("out_channels");
  m.config.in_channels = field("in_channels");
  m.config.input_height = field("input_height");
  m.config.input_width = field("input_width");
  m.epoch = field("epoch");
  m.config.validate();

  const ModelState expected = build(m.config, 0);
  if (expected.params.size() != m.params.size()) {
    throw DataError("checkpoint parameter list does not match its config");
  }
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    if (m.params[i].name != expected.params[i].name ||
        m.params[i].shape != expected.params[i].shape) {
      throw DataError("checkpoint parameter " + m.params[i].name + " does not match its config");
    }
    auto& v = m.params[i].value;
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    if (!in) throw DataError("truncated checkpoint data in " + path.string());
  }
  return m;
}

}  // namespace fcrseg
