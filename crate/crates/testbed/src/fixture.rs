//! Decompiled-source stand-in for the smart pet app, used by the static scan.

use std::path::{Path, PathBuf};

use toyaudit_core::fsutil::write_atomic;

/// Identifiers of the two planted in-app-purchase secrets.
pub const PLANTED_SECRETS: [&str; 2] = ["NOOK_ALLPACK_SERVICE_INAPP_SECRET", "NOOK_PACK_SERVICE_INAPP_SECRET"];

pub const NOOK_CONFIG_PATH: &str = "app/src/main/java/com/petmaker/nook/NookConfig.java";

// Values are fabricated placeholders.
const NOOK_CONFIG: &str = r#"package com.petmaker.nook;

public final class NookConfig {
    public static final String LOG_TAG = "PetNook";
    public static final int MAX_RETRIES = 3;
    public static final boolean SANDBOX = false;

    public static final String NOOK_ALLPACK_SERVICE_INAPP_SECRET = "b7Qz2xLk9PfW4mRtE5uN";
    public static final String NOOK_PACK_SERVICE_INAPP_SECRET = "Hn3vX8cJq1ZsY6dAo0Gk";

    private NookConfig() {
    }
}
"#;

const MAIN_ACTIVITY: &str = r#"package com.petmaker.app;

public class MainActivity {
    private static final String TAG = "Main";
    private static final String MODE = "feed";
    private int feedCount = 0;

    void onFeed() {
        feedCount = feedCount + 1;
    }
}
"#;

/// Writes the source tree under `root` and returns `root`.
pub fn write_smartpet_source(root: &Path) -> std::io::Result<PathBuf> {
    let files = [
        (NOOK_CONFIG_PATH, NOOK_CONFIG),
        ("app/src/main/java/com/petmaker/app/MainActivity.java", MAIN_ACTIVITY),
    ];
    for (rel, text) in files {
        let path = root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        write_atomic(&path, text.as_bytes())?;
    }
    Ok(root.to_path_buf())
}

/// 1-based line of each planted secret in the config file.
pub fn planted_secret_lines() -> Vec<(&'static str, usize)> {
    PLANTED_SECRETS
        .iter()
        .map(|id| {
            let line = NOOK_CONFIG
                .lines()
                .position(|l| l.contains(id))
                .expect("planted identifier present")
                + 1;
            (*id, line)
        })
        .collect()
}
