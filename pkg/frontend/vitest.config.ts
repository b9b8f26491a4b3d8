import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // The e2e file boots the Python service and, on a cold checkout,
    // builds dist/ first; give its hooks room to breathe.
    testTimeout: 30_000,
    hookTimeout: 120_000,
  },
});
