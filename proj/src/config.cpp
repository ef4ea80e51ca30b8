#include "fcrseg/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fcrseg {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("invalid value '" + value + "' for " + key);
}

template <typename T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) bad_value(key, v);
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v);
}

std::string real(double d) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  return buf;
}

// Field accessors are written once against RunConfig&; getters only read through it.
RunConfig& mutable_view(const RunConfig& c) { return const_cast<RunConfig&>(c); }

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Member>
Field int_field(const char* key, Member member) {
  return {[key, member](RunConfig& c, const std::string& v) {
            std::invoke(member, c) = parse_int<std::remove_reference_t<decltype(std::invoke(member, c))>>(key, v);
          },
          [member](const RunConfig& c) { return std::to_string(std::invoke(member, mutable_view(c))); }};
}

template <typename Member>
Field real_field(const char* key, Member member) {
  return {[key, member](RunConfig& c, const std::string& v) { std::invoke(member, c) = parse_real(key, v); },
          [member](const RunConfig& c) { return real(std::invoke(member, mutable_view(c))); }};
}

template <typename Member>
Field bool_field(const char* key, Member member) {
  return {[key, member](RunConfig& c, const std::string& v) { std::invoke(member, c) = parse_bool(key, v); },
          [member](const RunConfig& c) { return std::string(std::invoke(member, mutable_view(c)) ? "true" : "false"); }};
}

template <typename Member>
Field string_field(Member member) {
  return {[member](RunConfig& c, const std::string& v) { std::invoke(member, c) = v; },
          [member](const RunConfig& c) { return std::invoke(member, mutable_view(c)); }};
}

// Ordered so serialized configs read top-down: network, schedule, loss, data.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    t.emplace_back("base_filters", int_field("base_filters", [](RunConfig& c) -> int& { return c.net.base_filters; }));
    t.emplace_back("depth", int_field("depth", [](RunConfig& c) -> int& { return c.net.depth; }));
    t.emplace_back("out_channels", int_field("out_channels", [](RunConfig& c) -> int& { return c.net.out_channels; }));
    t.emplace_back("input_height", int_field("input_height", [](RunConfig& c) -> int& { return c.net.input_height; }));
    t.emplace_back("input_width", int_field("input_width", [](RunConfig& c) -> int& { return c.net.input_width; }));
    t.emplace_back("batch_size", int_field("batch_size", [](RunConfig& c) -> int& { return c.train.batch_size; }));
    t.emplace_back("lr", real_field("lr", [](RunConfig& c) -> double& { return c.train.lr; }));
    t.emplace_back("epochs", int_field("epochs", [](RunConfig& c) -> int& { return c.train.epochs; }));
    t.emplace_back("lr_decay", real_field("lr_decay", [](RunConfig& c) -> double& { return c.train.lr_decay; }));
    t.emplace_back("schedule_period",
                   int_field("schedule_period", [](RunConfig& c) -> int& { return c.train.schedule_period; }));
    t.emplace_back("alpha_schedule",
                   Field{[](RunConfig& c, const std::string& v) { c.train.alpha_schedule = parse_schedule(v); },
                         [](const RunConfig& c) { return format_schedule(c.train.alpha_schedule); }});
    t.emplace_back("adjacency_radius",
                   int_field("adjacency_radius", [](RunConfig& c) -> int& { return c.train.adjacency_radius; }));
    t.emplace_back("include_background",
                   bool_field("include_background", [](RunConfig& c) -> bool& { return c.train.include_background; }));
    t.emplace_back("w_intra", real_field("w_intra", [](RunConfig& c) -> double& { return c.train.loss.w_intra; }));
    t.emplace_back("w_inter", real_field("w_inter", [](RunConfig& c) -> double& { return c.train.loss.w_inter; }));
    t.emplace_back("intra_warmup",
                   int_field("intra_warmup", [](RunConfig& c) -> int& { return c.train.intra_warmup; }));
    t.emplace_back("remap_inter",
                   bool_field("remap_inter", [](RunConfig& c) -> bool& { return c.train.loss.remap_inter; }));
    t.emplace_back("loss_on",
                   Field{[](RunConfig& c, const std::string& v) {
                           if (v != "post" && v != "pre") bad_value("loss_on", v);
                           c.train.loss_post_activation = v == "post";
                         },
                         [](const RunConfig& c) { return std::string(c.train.loss_post_activation ? "post" : "pre"); }});
    t.emplace_back("eval_every", int_field("eval_every", [](RunConfig& c) -> int& { return c.train.eval_every; }));
    t.emplace_back("min_area", int_field("min_area", [](RunConfig& c) -> int& { return c.train.post.min_area; }));
    t.emplace_back("background_policy",
                   Field{[](RunConfig& c, const std::string& v) {
                           if (v == "border_majority") c.train.post.background = BackgroundPolicy::BorderMajority;
                           else if (v == "largest_component") c.train.post.background = BackgroundPolicy::LargestComponent;
                           else if (v == "none") c.train.post.background = BackgroundPolicy::None;
                           else bad_value("background_policy", v);
                         },
                         [](const RunConfig& c) -> std::string {
                           switch (c.train.post.background) {
                             case BackgroundPolicy::BorderMajority: return "border_majority";
                             case BackgroundPolicy::LargestComponent: return "largest_component";
                             case BackgroundPolicy::None: return "none";
                           }
                           return "border_majority";
                         }});
    t.emplace_back("connectivity",
                   Field{[](RunConfig& c, const std::string& v) {
                           if (v == "4") c.train.post.connectivity = Connectivity::Four;
                           else if (v == "8") c.train.post.connectivity = Connectivity::Eight;
                           else bad_value("connectivity", v);
                         },
                         [](const RunConfig& c) {
                           return std::string(c.train.post.connectivity == Connectivity::Four ? "4" : "8");
                         }});
    t.emplace_back("adam_beta1", real_field("adam_beta1", [](RunConfig& c) -> double& { return c.train.adam_beta1; }));
    t.emplace_back("adam_beta2", real_field("adam_beta2", [](RunConfig& c) -> double& { return c.train.adam_beta2; }));
    t.emplace_back("adam_eps", real_field("adam_eps", [](RunConfig& c) -> double& { return c.train.adam_eps; }));
    t.emplace_back("seed", int_field("seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; }));
    t.emplace_back("device", string_field([](RunConfig& c) -> std::string& { return c.train.device; }));
    t.emplace_back("parallelism", string_field([](RunConfig& c) -> std::string& { return c.train.parallelism; }));
    t.emplace_back("data_dir", string_field([](RunConfig& c) -> std::string& { return c.data_dir; }));
    t.emplace_back("out_dir", string_field([](RunConfig& c) -> std::string& { return c.out_dir; }));
    t.emplace_back("focal_plane", int_field("focal_plane", [](RunConfig& c) -> int& { return c.focal_plane; }));
    return t;
  }();
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  throw ConfigError("unknown config key: " + key);
}

}  // namespace

std::string format_schedule(const ActivationSpec& spec) {
  std::string out;
  for (const auto& [epoch, alpha] : spec.schedule) {
    if (!out.empty()) out += ",";
    out += std::to_string(epoch) + ":" + real(alpha);
  }
  return out;
}

ActivationSpec parse_schedule(const std::string& text) {
  ActivationSpec spec;
  std::stringstream items(text);
  std::string item;
  while (std::getline(items, item, ',')) {
    item = trim(item);
    const auto colon = item.find(':');
    if (colon == std::string::npos) bad_value("alpha_schedule", text);
    spec.schedule.emplace_back(parse_int<int>("alpha_schedule", trim(item.substr(0, colon))),
                               parse_real("alpha_schedule", trim(item.substr(colon + 1))));
  }
  if (spec.schedule.empty()) bad_value("alpha_schedule", text);
  spec.alpha = spec.schedule.front().second;
  spec.validate();
  return spec;
}

RunConfig RunConfig::full() { return RunConfig{}; }

RunConfig RunConfig::desk() {
  RunConfig c;
  c.net.base_filters = 8;
  c.net.depth = 4;
  c.net.input_height = 128;
  c.net.input_width = 128;
  c.train = TrainConfig::desk();
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  field(key).set(*this, trim(value));
}

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, f] : fields()) n.push_back(name);
    return n;
  }();
  return names;
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(*this) + "\n";
  return out;
}

RunConfig RunConfig::parse(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + " lacks '='");
    }
    base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig RunConfig::load(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), std::move(base));
}

void RunConfig::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config " + path.string());
  out << serialize();
}

}  // namespace fcrseg
