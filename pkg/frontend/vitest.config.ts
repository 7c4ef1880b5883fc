import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    environmentOptions: {
      happyDOM: {
        // the tests call a real local server on a random port
        settings: { fetch: { disableSameOriginPolicy: true } },
      },
    },
    globals: true,
    // each test file spawns its own backend; keep them sequential
    fileParallelism: false,
    testTimeout: 60000,
    hookTimeout: 60000,
  },
});
