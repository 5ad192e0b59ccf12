#include "arena/arena.h"

#include <cstdio>
#include <string>

#include "arena/expctl.hpp"
#include "arena/gradcheck.hpp"

struct arena_config {
    arena::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& message) {
    g_last_error = message;
    return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const arena::ConfigError& e) {
        return fail(ARENA_ERR_CONFIG, e.what());
    } catch (const arena::ContractError& e) {
        return fail(ARENA_ERR_CONTRACT, e.what());
    } catch (const std::exception& e) {
        return fail(ARENA_ERR_CONTRACT, e.what());
    }
}

}  // namespace

extern "C" {

int arena_config_preset(const char* name, arena_config** out) {
    if (!name || !out) return fail(ARENA_ERR_CONFIG, "null argument");
    return guarded([&] {
        *out = new arena_config{arena::preset_config(name)};
        return ARENA_OK;
    });
}

int arena_config_load(const char* path, arena_config** inout) {
    if (!path || !inout) return fail(ARENA_ERR_CONFIG, "null argument");
    return guarded([&] {
        if (*inout) {
            std::FILE* f = std::fopen(path, "rb");
            if (!f) throw arena::ConfigError("cannot open config file '" + std::string(path) + "'");
            std::string text;
            char buf[4096];
            size_t got;
            while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) text.append(buf, got);
            std::fclose(f);
            (*inout)->cfg = arena::parse_config_text(text, (*inout)->cfg);
            (*inout)->cfg.validate();
        } else {
            *inout = new arena_config{arena::load_config(path)};
        }
        return ARENA_OK;
    });
}

int arena_config_set(arena_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) return fail(ARENA_ERR_CONFIG, "null argument");
    return guarded([&] {
        cfg->cfg = arena::parse_config_text(std::string(key) + " = " + value, cfg->cfg);
        cfg->cfg.validate();
        return ARENA_OK;
    });
}

void arena_config_free(arena_config* cfg) { delete cfg; }

int arena_run(const arena_config* cfg, const char* out_dir, int n_seeds, int parallel) {
    if (!cfg) return fail(ARENA_ERR_CONFIG, "null config");
    return guarded([&] {
        const std::string dir = out_dir ? out_dir : cfg->cfg.out_dir;
        arena::run_many(cfg->cfg, n_seeds, parallel, dir);
        return ARENA_OK;
    });
}

int arena_check_gradients(int trials) {
    return guarded([&]() -> int {
        const auto report = arena::run_gradient_checks(trials);
        std::string detail;
        for (const auto& line : report.lines) detail += line + "\n";
        if (!report.pass) return fail(ARENA_ERR_GRADCHECK, detail);
        g_last_error = detail;  // informational
        return ARENA_OK;
    });
}

int arena_probe(const char* in_dir, const char* out_path) {
    if (!in_dir || !out_path) return fail(ARENA_ERR_CONFIG, "null argument");
    return guarded([&] {
        arena::probe_from_dir(in_dir, out_path);
        return ARENA_OK;
    });
}

const char* arena_last_error(void) { return g_last_error.c_str(); }

}  // extern "C"
