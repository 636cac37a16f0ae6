#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "gsstex/config.hpp"

TEST(Config, DefaultsValidate) {
    const gsstex::RunConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.framework, gsstex::Framework::Bow);
    EXPECT_EQ(cfg.gss.count, 7);
    EXPECT_EQ(cfg.gss.base, 1.5);
    EXPECT_EQ(cfg.encode.pca_dim, 100u);
    EXPECT_EQ(cfg.encode.gmm_k, 256u);
}

TEST(Config, SectionsAndComments) {
    gsstex::RunConfig cfg;
    gsstex::apply_config_text(cfg, R"(framework = "lbp"   # inline
seed = 9
[gss]
base = 1.3
count = 5
[lbp]
scales = "8:1,16:2"
[svm]
C = 10
standardize = true
)");
    EXPECT_EQ(cfg.framework, gsstex::Framework::Lbp);
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.gss.base, 1.3);
    EXPECT_EQ(cfg.gss.count, 5);
    EXPECT_EQ(cfg.lbp.histogram_length(), 28u);
    EXPECT_EQ(cfg.svm.C, 10.0);
    EXPECT_TRUE(cfg.svm.standardize);
}

TEST(Config, UnknownKeyNamesNearestKnownKey) {
    gsstex::RunConfig cfg;
    try {
        gsstex::apply_config_text(cfg, "gss.bass = 1.5\n");
        FAIL() << "expected a config error";
    } catch (const gsstex::ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("gss.base"), std::string::npos) << e.what();
        EXPECT_EQ(e.exit_code(), 2);
    }
    EXPECT_EQ(gsstex::nearest_config_key("encode.gmmk"), "encode.gmm_k");
}

TEST(Config, BadValuesAreConfigErrors) {
    gsstex::RunConfig cfg;
    EXPECT_THROW(cfg.set("gss.count", "seven"), gsstex::ConfigError);
    EXPECT_THROW(cfg.set("framework", "cnn"), gsstex::ConfigError);
    EXPECT_THROW(cfg.set("svm.standardize", "maybe"), gsstex::ConfigError);
    EXPECT_THROW(gsstex::apply_config_text(cfg, "just words\n"), gsstex::ConfigError);
    cfg.set("load.radius", "3");
    EXPECT_THROW(cfg.validate(), gsstex::ConfigError);
    gsstex::RunConfig b;
    b.set("gss.base", "1.0");
    EXPECT_THROW(b.validate(), gsstex::ConfigError);
    EXPECT_THROW(gsstex::load_config("/nonexistent/config.toml"), gsstex::ConfigError);
}

TEST(Config, ResolvedTextParsesBackIdentically) {
    gsstex::RunConfig cfg;
    cfg.set("framework", "lbp");
    cfg.set("gss.base", "1.7");
    cfg.set("encode.em_tol", "0.000123");
    cfg.set("svm.C", "0.1");
    cfg.set("lbp.scales", "8:1,24:3");
    const auto text = cfg.to_text();
    gsstex::RunConfig back;
    gsstex::apply_config_text(back, text);
    EXPECT_EQ(back.to_text(), text);
    for (const auto& key : gsstex::RunConfig::keys()) EXPECT_EQ(back.get(key), cfg.get(key)) << key;
    EXPECT_EQ(back.gss.base, 1.7);
    EXPECT_EQ(back.encode.em_tolerance, 0.000123);
}

TEST(Config, DerivedSeedsDifferByStage) {
    gsstex::RunConfig cfg;
    cfg.seed = 5;
    EXPECT_NE(cfg.encoder_options().seed, cfg.svm_options().seed);
    EXPECT_EQ(cfg.encoder_options().seed, gsstex::derive_seed(5, "encoder"));
    EXPECT_NE(gsstex::derive_seed(5, "svm", 0), gsstex::derive_seed(5, "svm", 1));
}
