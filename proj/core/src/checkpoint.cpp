#include "stacca/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "stacca/config.hpp"
#include "stacca/errors.hpp"

namespace stacca {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'C', 'K', 'P', 'T', '0', '1'};

template <typename T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T read_raw(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw artifact_error("checkpoint: truncated file");
  return value;
}

}  // namespace

void save_container(const std::string& path, const NamedTensors& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw artifact_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof kMagic);
  write_raw<std::uint64_t>(out, data.manifest.size());
  out.write(data.manifest.data(), static_cast<std::streamsize>(data.manifest.size()));
  write_raw<std::uint64_t>(out, data.entries.size());
  for (const auto& [name, entry] : data.entries) {
    write_raw<std::uint64_t>(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(entry.first.size()));
    for (int d : entry.first) write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(entry.second.data()),
              static_cast<std::streamsize>(entry.second.size() * sizeof(double)));
  }
  if (!out) throw artifact_error("failed while writing checkpoint: " + path);
}

NamedTensors load_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw artifact_error("cannot open checkpoint: " + path);
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + sizeof magic, kMagic))
    throw artifact_error("not a stacca checkpoint: " + path);
  NamedTensors data;
  const auto manifest_len = read_raw<std::uint64_t>(in);
  data.manifest.resize(manifest_len);
  in.read(data.manifest.data(), static_cast<std::streamsize>(manifest_len));
  const auto count = read_raw<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_raw<std::uint64_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    const auto rank = read_raw<std::uint32_t>(in);
    std::vector<int> shape(rank);
    std::uint64_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<int>(read_raw<std::uint32_t>(in));
      numel *= static_cast<std::uint64_t>(d);
    }
    std::vector<double> values(numel);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    if (!in) throw artifact_error("checkpoint: truncated tensor data in " + path);
    data.entries[name] = {std::move(shape), std::move(values)};
  }
  return data;
}

namespace {

void pack_params(std::vector<std::pair<std::string, ad::Parameter*>> params,
                 NamedTensors& out) {
  for (auto& [name, p] : params) out.entries[name] = {p->shape, p->value};
}

void unpack_params(const NamedTensors& data,
                   std::vector<std::pair<std::string, ad::Parameter*>> params) {
  for (auto& [name, p] : params) {
    const auto it = data.entries.find(name);
    if (it == data.entries.end())
      throw artifact_error("checkpoint: missing parameter " + name);
    if (it->second.first != p->shape)
      throw artifact_error("checkpoint: shape mismatch for " + name);
    p->value = it->second.second;
  }
}

}  // namespace

void save_checkpoint(const std::string& path, PolicyModel& policy,
                     ValueModel& critic, const EnvConfig& env) {
  NamedTensors data;
  std::ostringstream manifest;
  write_model_config(manifest, policy.cfg);
  write_env_config(manifest, env);
  data.manifest = manifest.str();
  pack_params(policy.named_params(), data);
  pack_params(critic.named_params(), data);
  save_container(path, data);
}

LoadedModels load_checkpoint(const std::string& path) {
  const NamedTensors data = load_container(path);
  const KvTree kv = KvTree::parse_string(data.manifest);
  LoadedModels out;
  out.model_cfg = model_config_from_kv(kv);
  out.env = env_config_from_kv(kv);
  RngStream scratch(0, Stream::ParamInit);  // values are overwritten below
  out.policy = make_policy_model(out.model_cfg, scratch);
  out.critic = make_value_model(out.model_cfg, scratch);
  unpack_params(data, out.policy.named_params());
  unpack_params(data, out.critic.named_params());
  return out;
}

void save_opt_state(const std::string& path, PolicyModel& policy,
                    ValueModel& critic, long adam_t_actor, long adam_t_critic) {
  NamedTensors data;
  data.manifest = "adam_t_actor = " + std::to_string(adam_t_actor) +
                  "\nadam_t_critic = " + std::to_string(adam_t_critic) + "\n";
  auto pack_moments = [&](std::vector<std::pair<std::string, ad::Parameter*>> params) {
    for (auto& [name, p] : params) {
      data.entries["adam_m/" + name] = {p->shape, p->m};
      data.entries["adam_v/" + name] = {p->shape, p->v};
    }
  };
  pack_moments(policy.named_params());
  pack_moments(critic.named_params());
  save_container(path, data);
}

void load_opt_state(const std::string& path, PolicyModel& policy,
                    ValueModel& critic, long& adam_t_actor, long& adam_t_critic) {
  const NamedTensors data = load_container(path);
  const KvTree kv = KvTree::parse_string(data.manifest);
  adam_t_actor = static_cast<long>(kv.get_u64("adam_t_actor", 0));
  adam_t_critic = static_cast<long>(kv.get_u64("adam_t_critic", 0));
  auto unpack_moments = [&](std::vector<std::pair<std::string, ad::Parameter*>> params) {
    for (auto& [name, p] : params) {
      const auto m = data.entries.find("adam_m/" + name);
      const auto v = data.entries.find("adam_v/" + name);
      if (m == data.entries.end() || v == data.entries.end())
        throw artifact_error("optimizer state: missing moments for " + name);
      p->m = m->second.second;
      p->v = v->second.second;
    }
  };
  unpack_moments(policy.named_params());
  unpack_moments(critic.named_params());
}

}  // namespace stacca
