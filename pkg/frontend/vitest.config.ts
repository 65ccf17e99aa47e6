import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the live test drives a real service for a full minute; it sets
    // its own per-test timeouts on top of this
    testTimeout: 20_000,
    hookTimeout: 180_000,
    // let the acceptance verdict lines reach the report
    reporters: ["verbose"],
    disableConsoleIntercept: true,
  },
});
