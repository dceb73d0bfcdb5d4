#include <doctest.h>

#include <stdexcept>

#include "oodrl/config.hpp"

using namespace oodrl;

TEST_CASE("empty document yields the defaults") {
    const ExperimentConfig cfg = parse_config("");
    CHECK(cfg.model.kind == ModelKind::boot);
    CHECK(cfg.model.mc_passes == 10);
    CHECK(cfg.model.heads == 10);
    CHECK(cfg.model.keep_prob == 0.95);
    CHECK(cfg.train.episodes == 10000);
    CHECK(cfg.train.gamma == 0.99);
    CHECK(cfg.train.batch_size == 32);
    CHECK(cfg.train.mask_prob == 0.2);
    CHECK(cfg.train.snapshot_interval == 100);
    CHECK(cfg.eval_runs == 30);
    CHECK(cfg.jobs == 1);
    CHECK(cfg.out_dir == "out");
}

TEST_CASE("values parse into the right fields") {
    const ExperimentConfig cfg = parse_config(
        "[model]\n"
        "kind = bootp\n"
        "beta = 2.5\n"
        "heads = 4\n"
        "[train]\n"
        "episodes = 250\n"
        "seed = 12345\n"
        "[eval]\n"
        "runs = 7\n"
        "jobs = 2\n"
        "[output]\n"
        "dir = /tmp/somewhere\n");
    CHECK(cfg.model.kind == ModelKind::bootp);
    CHECK(cfg.model.beta == 2.5);
    CHECK(cfg.model.heads == 4);
    CHECK(cfg.train.episodes == 250);
    CHECK(cfg.train.seed == 12345);
    CHECK(cfg.eval_runs == 7);
    CHECK(cfg.jobs == 2);
    CHECK(cfg.out_dir == "/tmp/somewhere");
}

TEST_CASE("unknown keys and sections are rejected by name") {
    try {
        parse_config("[train]\nepisodez = 5\n");
        FAIL("expected a throw");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("episodez") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("[nope]\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[train]\nepisodes ten\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[train]\nepisodes = ten\n"), std::invalid_argument);
}

TEST_CASE("serialization round trip is idempotent") {
    ExperimentConfig cfg = parse_config("");
    cfg.model.kind = ModelKind::mccd;
    cfg.model.lambda_w = 3e-7;
    cfg.train.lr = 5e-4;
    cfg.train.seed = 99;
    const std::string once = serialize_config(cfg);
    const std::string twice = serialize_config(parse_config(once));
    CHECK(once == twice);

    const ExperimentConfig back = parse_config(once);
    CHECK(back.model.kind == ModelKind::mccd);
    CHECK(back.model.lambda_w == 3e-7);
    CHECK(back.train.lr == 5e-4);
}

TEST_CASE("config hash ignores output location and thread count") {
    ExperimentConfig a = parse_config("");
    ExperimentConfig b = a;
    b.out_dir = "/tmp/elsewhere";
    b.jobs = 8;
    CHECK(config_hash(a) == config_hash(b));

    b.train.seed = a.train.seed + 1;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.model.kind = ModelKind::mccd;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("validation") {
    ExperimentConfig cfg = parse_config("");
    cfg.model.keep_prob = 0.0;
    CHECK_THROWS(validate(cfg));

    cfg = parse_config("");
    cfg.model.kind = ModelKind::boot;
    cfg.model.heads = 1;
    CHECK_THROWS(validate(cfg));

    cfg = parse_config("");
    cfg.eval_runs = 0;
    CHECK_THROWS(validate(cfg));

    // disconnected grid override is caught at validation time
    CHECK_THROWS(parse_config("[grid]\nwall_gap_row = 99\n"));
}

TEST_CASE("model kind names round trip") {
    for (ModelKind kind : {ModelKind::mcd, ModelKind::mccd, ModelKind::boot, ModelKind::bootp})
        CHECK(model_kind_from_name(model_kind_name(kind)) == kind);
    CHECK_THROWS(model_kind_from_name("unknown"));
}
