#include "cdrx/knowledge_base.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace cdrx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("cdrx_kb_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Table sample() { return Table{{"k", "v"}, {{"a", "1"}, {"b", "x,y"}}}; }

} // namespace

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(KnowledgeBase, WriteReadRoundTrip) {
    TempDir dir;
    KnowledgeBase kb(dir.path);
    auto receipt = kb.write(1, "things", sample());
    EXPECT_EQ(receipt.rows, 2u);
    EXPECT_EQ(receipt.digest, kb.table_digest(1, "things"));
    EXPECT_EQ(kb.read(1, "things", 2), sample());
    EXPECT_TRUE(kb.contains(1, "things"));
    EXPECT_EQ(kb.tables(1), std::vector<std::string>{"things"});
}

TEST(KnowledgeBase, HierarchicalReads) {
    TempDir dir;
    KnowledgeBase kb(dir.path);
    for (int l = 0; l <= max_layer; ++l) kb.write(l, "t", sample());
    for (int layer = 0; layer <= max_layer; ++layer)
        for (int reader = 0; reader <= max_layer; ++reader) {
            if (layer < reader)
                EXPECT_NO_THROW(kb.read(layer, "t", reader));
            else
                EXPECT_THROW(kb.read(layer, "t", reader), HierarchyViolation);
        }
    EXPECT_NO_THROW(kb.read(max_layer, "t", consumer_layer));
}

TEST(KnowledgeBase, MissingTableIsDependencyError) {
    TempDir dir;
    KnowledgeBase kb(dir.path);
    try {
        kb.read(2, "user_places", 3);
        FAIL();
    } catch (const DependencyError& e) {
        EXPECT_EQ(e.exit_code(), ExitCode::dependency_error);
        EXPECT_NE(std::string(e.what()).find("layer2/user_places"), std::string::npos);
    }
}

TEST(KnowledgeBase, RejectsBadNamesAndLayers) {
    TempDir dir;
    KnowledgeBase kb(dir.path);
    EXPECT_THROW(kb.write(6, "t", sample()), ConfigError);
    EXPECT_THROW(kb.write(-1, "t", sample()), ConfigError);
    EXPECT_THROW(kb.write(1, "../t", sample()), ConfigError);
    EXPECT_THROW(kb.write(1, "", sample()), ConfigError);
}

TEST(KnowledgeBase, TransactionReplacesWholeLayer) {
    TempDir dir;
    KnowledgeBase kb(dir.path);
    kb.write(3, "stale", sample());
    KnowledgeBase::LayerTransaction tx(kb, 3);
    tx.put("fresh", sample());
    auto receipts = tx.commit();
    ASSERT_EQ(receipts.size(), 1u);
    EXPECT_EQ(kb.tables(3), std::vector<std::string>{"fresh"});
    for (const auto& e : fs::directory_iterator(dir.path))
        EXPECT_EQ(e.path().filename().string().find(".layer"), std::string::npos) << e.path();
}

TEST(KnowledgeBase, DigestDependsOnContentOnly) {
    TempDir a, b;
    fs::path pb = b.path.string() + "_other";
    {
        KnowledgeBase ka(a.path), kb(pb);
        ka.write(1, "x", sample());
        ka.write(2, "y", sample());
        kb.write(2, "y", sample());
        kb.write(1, "x", sample());
        EXPECT_EQ(ka.digest(), kb.digest());
        kb.write(2, "y", Table{{"k"}, {{"z"}}});
        EXPECT_NE(ka.digest(), kb.digest());
    }
    fs::remove_all(pb);
}

TEST(KbLock, ExcludesSecondHolder) {
    TempDir dir;
    KnowledgeBase kb(dir.path);
    {
        KbLock lock(kb.root());
        EXPECT_THROW(KbLock{kb.root()}, ConfigError);
    }
    EXPECT_NO_THROW(KbLock{kb.root()});
}
