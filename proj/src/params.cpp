#include "czsl/params.hpp"

#include <cstring>
#include <fstream>

#include "czsl/error.hpp"

namespace czsl {

Tensor2& ParamStore::create(const std::string& name, Tensor2 init) {
    if (has(name)) throw UsageError("ParamStore: parameter already exists: " + name);
    return params_[name] = std::move(init);
}

Tensor2& ParamStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("ParamStore: missing parameter " + name);
    return it->second;
}

const Tensor2& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("ParamStore: missing parameter " + name);
    return it->second;
}

Tensor2& ParamStore::create_buffer(const std::string& name, Tensor2 init) {
    return buffers_[name] = std::move(init);
}

Tensor2& ParamStore::buffer(const std::string& name) {
    auto it = buffers_.find(name);
    if (it == buffers_.end()) throw ConfigError("ParamStore: missing buffer " + name);
    return it->second;
}

const Tensor2& ParamStore::buffer(const std::string& name) const {
    auto it = buffers_.find(name);
    if (it == buffers_.end()) throw ConfigError("ParamStore: missing buffer " + name);
    return it->second;
}

Tensor2& ParamStore::state(const std::string& slot, const std::string& name) {
    auto& slot_map = state_[slot];
    auto it = slot_map.find(name);
    if (it == slot_map.end()) {
        const Tensor2& p = at(name);
        it = slot_map.emplace(name, Tensor2::zeros(p.rows, p.cols)).first;
    }
    return it->second;
}

std::vector<std::string> ParamStore::param_names() const {
    std::vector<std::string> names;
    names.reserve(params_.size());
    for (const auto& [name, _] : params_) names.push_back(name);
    return names;
}

namespace {

constexpr char kMagic[8] = {'C', 'Z', 'S', 'L', 'C', 'K', 'P', '1'};

void write_u64(std::ostream& os, uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void write_section(std::ostream& os, const std::map<std::string, Tensor2>& m) {
    write_u64(os, m.size());
    for (const auto& [name, t] : m) {
        write_u64(os, name.size());
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u64(os, static_cast<uint64_t>(t.rows));
        write_u64(os, static_cast<uint64_t>(t.cols));
        os.write(reinterpret_cast<const char*>(t.d.data()),
                 static_cast<std::streamsize>(t.d.size() * sizeof(double)));
    }
}

std::map<std::string, Tensor2> read_section(std::istream& is) {
    std::map<std::string, Tensor2> m;
    const uint64_t count = read_u64(is);
    for (uint64_t i = 0; i < count; ++i) {
        const uint64_t name_len = read_u64(is);
        std::string name(name_len, '\0');
        is.read(name.data(), static_cast<std::streamsize>(name_len));
        const int rows = static_cast<int>(read_u64(is));
        const int cols = static_cast<int>(read_u64(is));
        Tensor2 t(rows, cols);
        is.read(reinterpret_cast<char*>(t.d.data()),
                static_cast<std::streamsize>(t.d.size() * sizeof(double)));
        if (!is) throw LoadError("checkpoint: truncated tensor data for " + name);
        m.emplace(std::move(name), std::move(t));
    }
    return m;
}

}  // namespace

void ParamStore::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw LoadError("checkpoint: cannot open for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_u64(os, static_cast<uint64_t>(step_count_));
    write_section(os, params_);
    write_section(os, buffers_);
    write_u64(os, state_.size());
    for (const auto& [slot, m] : state_) {
        write_u64(os, slot.size());
        os.write(slot.data(), static_cast<std::streamsize>(slot.size()));
        write_section(os, m);
    }
    if (!os) throw LoadError("checkpoint: write failed: " + path);
}

ParamStore ParamStore::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("checkpoint: cannot open: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw LoadError("checkpoint: bad magic in " + path);
    ParamStore store;
    store.step_count_ = static_cast<int64_t>(read_u64(is));
    store.params_ = read_section(is);
    store.buffers_ = read_section(is);
    const uint64_t num_slots = read_u64(is);
    for (uint64_t i = 0; i < num_slots; ++i) {
        const uint64_t slot_len = read_u64(is);
        std::string slot(slot_len, '\0');
        is.read(slot.data(), static_cast<std::streamsize>(slot_len));
        store.state_[slot] = read_section(is);
    }
    return store;
}

}  // namespace czsl
