from evgrad.harness import main

main()
